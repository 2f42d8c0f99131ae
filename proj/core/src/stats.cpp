#include "driftgate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Cholesky>

#include "driftgate/error.hpp"

namespace driftgate {

namespace {

constexpr double kSymmetryTolerance = 1e-9;
constexpr double kPivotTolerance = 1e-13;

// Reservoir replacement draws are a pure function of the sample's global
// index, so a model restored from a checkpoint keeps sampling exactly as the
// original would have.
constexpr std::uint64_t kReservoirSalt = 0x9e3779b97f4a7c15ULL;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::size_t capacity_of(const AlphaPolicy& policy) {
  if (const auto* lw = std::get_if<LedoitWolfAlpha>(&policy)) return lw->reservoir_capacity;
  return 0;
}

void validate_policy(const AlphaPolicy& policy) {
  if (const auto* fixed = std::get_if<FixedAlpha>(&policy)) {
    if (!(fixed->alpha >= 0.0 && fixed->alpha <= 1.0)) {
      throw InputError("fixed shrinkage alpha must lie in [0, 1], got " +
                       std::to_string(fixed->alpha));
    }
  } else if (std::get<LedoitWolfAlpha>(policy).reservoir_capacity < 2) {
    throw InputError("Ledoit-Wolf reservoir capacity must be at least 2");
  }
}

void validate_batch(const Eigen::MatrixXd& batch, std::size_t dim) {
  if (batch.cols() == 0) throw InputError("cannot absorb an empty batch");
  if (static_cast<std::size_t>(batch.rows()) != dim) {
    throw InputError("dimension mismatch: model has dim " + std::to_string(dim) +
                     ", batch vectors have " + std::to_string(batch.rows()));
  }
  if (!batch.allFinite()) throw InputError("batch contains non-finite entries");
}

}  // namespace

Eigen::MatrixXd shrink(const Eigen::MatrixXd& cov, double alpha) {
  if (cov.rows() != cov.cols() || cov.rows() == 0) {
    throw InputError("covariance must be a non-empty square matrix");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InputError("shrinkage alpha must lie in [0, 1], got " + std::to_string(alpha));
  }
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale) {
    throw InputError("covariance is not symmetric");
  }
  const double trace = cov.trace();
  if (!(trace > 0.0)) {
    throw DegenerateModelError("covariance trace is " + std::to_string(trace) +
                                   "; cannot build a shrinkage target",
                               0);
  }
  const auto dim = static_cast<double>(cov.rows());
  Eigen::MatrixXd out = (1.0 - alpha) * cov;
  out.diagonal().array() += alpha * trace / dim;
  return out;
}

double ledoit_wolf_alpha(const Eigen::MatrixXd& samples, const Eigen::VectorXd& center) {
  const auto n = static_cast<double>(samples.cols());
  const auto p = static_cast<double>(samples.rows());
  if (samples.cols() == 0) return 0.0;

  // Everything the estimator needs is a function of the n x n Gram matrix,
  // which is far cheaper than the D x D sample covariance when n << D.
  const Eigen::MatrixXd centered = samples.colwise() - center;
  const Eigen::MatrixXd gram = centered.transpose() * centered;

  const double trace_s = gram.trace() / n;
  const double mu = trace_s / p;
  const double s_frob2 = gram.squaredNorm() / (n * n);
  const double fourth = gram.diagonal().squaredNorm();

  const double delta = (s_frob2 - 2.0 * mu * trace_s + p * mu * mu) / p;
  double beta = (fourth / n - s_frob2) / (p * n);
  beta = std::min(beta, delta);
  if (beta <= 0.0 || delta <= 0.0) return 0.0;
  return std::clamp(beta / delta, 0.0, 1.0);
}

NormalStats::NormalStats(std::size_t dim, AlphaPolicy policy)
    : dim_(dim),
      policy_(policy),
      sum_b_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      sum_A_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {
  if (dim == 0) throw InputError("model dimension must be positive");
  validate_policy(policy_);
  if (const auto* fixed = std::get_if<FixedAlpha>(&policy_)) alpha_ = fixed->alpha;
}

NormalStats::NormalStats(const NormalStats& other)
    : dim_(other.dim_),
      policy_(other.policy_),
      count_(other.count_),
      version_(other.version_),
      alpha_(other.alpha_),
      sum_b_(other.sum_b_),
      sum_A_(other.sum_A_),
      reservoir_(other.reservoir_) {
  std::lock_guard lock(other.cache_mutex_);
  cached_ = other.cached_;
}

NormalStats& NormalStats::operator=(const NormalStats& other) {
  if (this != &other) {
    NormalStats copy(other);
    *this = std::move(copy);
  }
  return *this;
}

NormalStats::NormalStats(NormalStats&& other) noexcept
    : dim_(other.dim_),
      policy_(other.policy_),
      count_(other.count_),
      version_(other.version_),
      alpha_(other.alpha_),
      sum_b_(std::move(other.sum_b_)),
      sum_A_(std::move(other.sum_A_)),
      reservoir_(std::move(other.reservoir_)),
      cached_(std::move(other.cached_)) {}

NormalStats& NormalStats::operator=(NormalStats&& other) noexcept {
  dim_ = other.dim_;
  policy_ = other.policy_;
  count_ = other.count_;
  version_ = other.version_;
  alpha_ = other.alpha_;
  sum_b_ = std::move(other.sum_b_);
  sum_A_ = std::move(other.sum_A_);
  reservoir_ = std::move(other.reservoir_);
  std::lock_guard lock(cache_mutex_);
  cached_ = std::move(other.cached_);
  return *this;
}

NormalStats::~NormalStats() = default;

NormalStats NormalStats::init_gaussian(std::size_t dim, const GaussianInit& init,
                                       AlphaPolicy policy) {
  if (init.samples < 2) {
    throw InputError("Gaussian initialization needs at least 2 samples (covariance uses M - 1)");
  }
  if (!(init.sigma >= 0.0) || !std::isfinite(init.sigma)) {
    throw InputError("initialization sigma must be finite and non-negative");
  }
  NormalStats stats(dim, policy);

  std::mt19937_64 rng(init.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd draws(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(init.samples));
  for (Eigen::Index c = 0; c < draws.cols(); ++c) {
    for (Eigen::Index r = 0; r < draws.rows(); ++r) draws(r, c) = init.sigma * normal(rng);
  }
  stats.accumulate(draws);
  stats.refresh_alpha();
  stats.snapshot();
  return stats;
}

NormalStats NormalStats::restore(std::size_t dim, std::uint64_t count, double alpha,
                                 Eigen::VectorXd sum_b, Eigen::MatrixXd sum_A,
                                 std::vector<Eigen::VectorXd> reservoir, AlphaPolicy policy) {
  NormalStats stats(dim, policy);
  const auto d = static_cast<Eigen::Index>(dim);
  if (sum_b.size() != d || sum_A.rows() != d || sum_A.cols() != d) {
    throw InputError("restored sums do not match the model dimension");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("restored alpha outside [0, 1]");
  for (const auto& v : reservoir) {
    if (v.size() != d) throw InputError("restored reservoir vector has the wrong dimension");
  }
  if (reservoir.size() > count) {
    throw InputError("restored reservoir is larger than the number of absorbed samples");
  }
  stats.count_ = count;
  stats.alpha_ = alpha;
  stats.sum_b_ = std::move(sum_b);
  stats.sum_A_ = std::move(sum_A);
  stats.reservoir_ = std::move(reservoir);
  if (stats.reservoir_.size() > stats.reservoir_capacity()) {
    stats.reservoir_.resize(stats.reservoir_capacity());
  }
  return stats;
}

void NormalStats::absorb(const Eigen::MatrixXd& batch) {
  if (count_ < 2) throw InputError("model must hold at least 2 samples before absorbing");
  validate_batch(batch, dim_);
  accumulate(batch);
  refresh_alpha();
  ++version_;
  std::lock_guard lock(cache_mutex_);
  cached_.reset();
}

void NormalStats::accumulate(const Eigen::MatrixXd& batch) {
  validate_batch(batch, dim_);
  sum_b_ += batch.rowwise().sum();
  sum_A_.selfadjointView<Eigen::Lower>().rankUpdate(batch);

  const std::size_t capacity = reservoir_capacity();
  for (Eigen::Index c = 0; c < batch.cols(); ++c) {
    const std::uint64_t index = count_ + static_cast<std::uint64_t>(c);
    if (capacity == 0) continue;
    if (reservoir_.size() < capacity) {
      reservoir_.emplace_back(batch.col(c));
    } else {
      const std::uint64_t slot = splitmix64(index ^ kReservoirSalt) % (index + 1);
      if (slot < capacity) reservoir_[slot] = batch.col(c);
    }
  }
  count_ += static_cast<std::uint64_t>(batch.cols());
}

void NormalStats::refresh_alpha() {
  if (std::holds_alternative<FixedAlpha>(policy_)) return;
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(dim_),
                          static_cast<Eigen::Index>(reservoir_.size()));
  for (std::size_t i = 0; i < reservoir_.size(); ++i) {
    samples.col(static_cast<Eigen::Index>(i)) = reservoir_[i];
  }
  alpha_ = ledoit_wolf_alpha(samples, mean());
}

std::size_t NormalStats::reservoir_capacity() const noexcept { return capacity_of(policy_); }

Eigen::MatrixXd NormalStats::sum_A() const {
  return sum_A_.selfadjointView<Eigen::Lower>();
}

Eigen::VectorXd NormalStats::mean() const {
  if (count_ == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  return sum_b_ / static_cast<double>(count_);
}

Eigen::MatrixXd NormalStats::empirical_covariance() const {
  if (count_ < 2) {
    throw DegenerateModelError("covariance needs at least 2 samples", version_);
  }
  const Eigen::VectorXd mu = mean();
  const double m = static_cast<double>(count_);
  const auto d = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd cov(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = j; i < d; ++i) {
      const double v = sum_A_(i, j) - mu(i) * sum_b_(j) - sum_b_(i) * mu(j) + m * mu(i) * mu(j);
      cov(i, j) = v / (m - 1.0);
      cov(j, i) = cov(i, j);
    }
  }
  return cov;
}

Eigen::MatrixXd NormalStats::shrunk_covariance() const {
  try {
    return shrink(empirical_covariance(), alpha_);
  } catch (const DegenerateModelError& e) {
    throw DegenerateModelError(e.what(), version_);
  }
}

SnapshotPtr NormalStats::snapshot() const {
  std::lock_guard lock(cache_mutex_);
  if (cached_ && cached_->version() == version_) return cached_;

  const Eigen::MatrixXd sigma = shrunk_covariance();
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  // LLT only rejects non-positive pivots; a rank-deficient matrix can leave
  // rounding-level positive ones, which are just as unusable.
  const double pivot_floor = kPivotTolerance * sigma.diagonal().maxCoeff();
  const bool singular =
      llt.info() != Eigen::Success ||
      (llt.matrixLLT().diagonal().array().square() <= pivot_floor).any();
  if (singular) {
    throw DegenerateModelError("shrunk covariance is not positive definite at version " +
                                   std::to_string(version_) + " (alpha " +
                                   std::to_string(alpha_) + ")",
                               version_);
  }
  cached_ = std::make_shared<const Snapshot>(version_, alpha_, mean(),
                                             PackedLower(llt.matrixL().toDenseMatrix()));
  return cached_;
}

}  // namespace driftgate
