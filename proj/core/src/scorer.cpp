#include "driftgate/scorer.hpp"

#include <string>

#include "driftgate/error.hpp"

namespace driftgate {

namespace {

void check_dim(const Snapshot& snapshot, std::size_t size) {
  if (size != snapshot.dim()) {
    throw InputError("dimension mismatch: model has dim " + std::to_string(snapshot.dim()) +
                     ", query has " + std::to_string(size));
  }
}

template <typename T>
double score_one(const Snapshot& snapshot, std::span<const T> z) {
  check_dim(snapshot, z.size());
  require_finite(z, "query vector");
  Eigen::MatrixXd centered(static_cast<Eigen::Index>(z.size()), 1);
  for (std::size_t i = 0; i < z.size(); ++i) {
    centered(static_cast<Eigen::Index>(i), 0) =
        static_cast<double>(z[i]) - snapshot.mean()(static_cast<Eigen::Index>(i));
  }
  double out = 0.0;
  snapshot.factor().solve_squared_norms(centered, std::span<double>(&out, 1));
  return out;
}

}  // namespace

double score(const Snapshot& snapshot, std::span<const double> z) {
  return score_one(snapshot, z);
}

double score(const Snapshot& snapshot, std::span<const float> z) {
  return score_one(snapshot, z);
}

std::vector<double> score_batch(const Snapshot& snapshot, const Eigen::MatrixXd& batch) {
  check_dim(snapshot, static_cast<std::size_t>(batch.rows()));
  if (!batch.allFinite()) throw InputError("batch contains non-finite entries");
  std::vector<double> out(static_cast<std::size_t>(batch.cols()), 0.0);
  if (out.empty()) return out;
  const Eigen::MatrixXd centered = batch.colwise() - snapshot.mean();
  snapshot.factor().solve_squared_norms(centered, out);
  return out;
}

Decision decide(double score, double threshold, std::uint64_t stats_version,
                std::uint64_t frame, std::uint32_t patch) {
  if (!(threshold > 0.0)) throw InputError("threshold must be positive");
  return Decision{frame, patch, score, threshold, score > threshold, stats_version};
}

Decision decide(const Snapshot& snapshot, std::span<const double> z, double threshold,
                std::uint64_t frame, std::uint32_t patch) {
  if (!(threshold > 0.0)) throw InputError("threshold must be positive");
  return decide(score(snapshot, z), threshold, snapshot.version(), frame, patch);
}

}  // namespace driftgate
