#include "driftgate/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>

#include "driftgate/error.hpp"
#include "driftgate/fileio.hpp"
#include "driftgate/parallel.hpp"
#include "driftgate/scorer.hpp"
#include "driftgate/stats.hpp"

namespace driftgate {

std::string to_string(BenchOp op) { return op == BenchOp::Score ? "score" : "absorb"; }

namespace {

using Clock = std::chrono::steady_clock;

class ThreadCapGuard {
 public:
  explicit ThreadCapGuard(std::size_t n) : previous_(max_threads()) { set_max_threads(n); }
  ~ThreadCapGuard() { set_max_threads(previous_); }
  ThreadCapGuard(const ThreadCapGuard&) = delete;
  ThreadCapGuard& operator=(const ThreadCapGuard&) = delete;

 private:
  std::size_t previous_;
};

Eigen::MatrixXd random_batch(std::uint32_t dim, std::uint32_t count, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(dim, count);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = normal(rng);
  }
  return m;
}

template <typename Body>
void time_loop(BenchResult& result, std::uint32_t warmup, std::uint32_t reps, Body body) {
  for (std::uint32_t i = 0; i < warmup; ++i) body();
  std::vector<double> ms;
  ms.reserve(reps);
  for (std::uint32_t i = 0; i < reps; ++i) {
    const auto start = Clock::now();
    body();
    ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - start).count());
  }
  double mean = 0.0;
  for (double v : ms) mean += v;
  mean /= static_cast<double>(ms.size());
  double var = 0.0;
  for (double v : ms) var += (v - mean) * (v - mean);
  result.samples = reps;
  result.mean_ms = mean;
  result.std_ms = ms.size() > 1 ? std::sqrt(var / static_cast<double>(ms.size() - 1)) : 0.0;
}

}  // namespace

std::vector<BenchResult> run_bench(const BenchOptions& options) {
  if (options.reps < kMinBenchReps) {
    throw InputError("bench needs at least " + std::to_string(kMinBenchReps) + " reps, got " +
                     std::to_string(options.reps));
  }
  if (options.dims.empty() || options.patch_counts.empty()) {
    throw InputError("bench needs at least one dim and one patch count");
  }
  for (auto d : options.dims) {
    if (d == 0) throw InputError("bench dims must be positive");
  }
  for (auto p : options.patch_counts) {
    if (p == 0) throw InputError("bench patch counts must be positive");
  }

  ThreadCapGuard cap(options.parallel ? max_threads() : 1);
  const GaussianInit init{64, 1.0, options.seed};
  const AlphaPolicy policy = FixedAlpha{0.1};
  std::mt19937_64 rng(options.seed);

  std::vector<BenchResult> results;
  for (BenchOp op : {BenchOp::Score, BenchOp::Absorb}) {
    for (std::uint32_t dim : options.dims) {
      for (std::uint32_t count : options.patch_counts) {
        BenchResult r;
        r.op = op;
        r.dim = dim;
        r.patch_count = count;
        try {
          NormalStats stats = NormalStats::init_gaussian(dim, init, policy);
          const Eigen::MatrixXd batch = random_batch(dim, count, rng);
          if (op == BenchOp::Score) {
            const SnapshotPtr snap = stats.snapshot();
            volatile double sink = 0.0;
            time_loop(r, options.warmup, options.reps,
                      [&] { sink = sink + score_batch(*snap, batch).front(); });
          } else {
            time_loop(r, options.warmup, options.reps, [&] {
              stats.absorb(batch);
              stats.snapshot();
            });
          }
        } catch (const Error& e) {
          r.error = e.what();
        }
        results.push_back(std::move(r));
      }
    }
  }
  return results;
}

std::string bench_csv(const std::vector<BenchResult>& results) {
  std::ostringstream out;
  out << "op,dim,patch_count,samples,mean_ms,std_ms,error\n";
  out << std::setprecision(6) << std::fixed;
  for (const auto& r : results) {
    out << to_string(r.op) << ',' << r.dim << ',' << r.patch_count << ',' << r.samples << ','
        << r.mean_ms << ',' << r.std_ms << ',';
    if (r.error) {
      std::string e = *r.error;
      for (char& c : e) {
        if (c == ',' || c == '\n') c = ' ';
      }
      out << e;
    }
    out << '\n';
  }
  return out.str();
}

void write_bench_csv(const std::vector<BenchResult>& results, const std::filesystem::path& path) {
  const std::string text = bench_csv(results);
  write_file_atomically(path, [&](std::ostream& out) { out << text; });
}

std::string bench_table(const std::vector<BenchResult>& results) {
  std::vector<std::uint32_t> dims;
  std::map<std::pair<int, std::uint32_t>, std::map<std::uint32_t, const BenchResult*>> rows;
  for (const auto& r : results) {
    if (std::find(dims.begin(), dims.end(), r.dim) == dims.end()) dims.push_back(r.dim);
    rows[{static_cast<int>(r.op), r.patch_count}][r.dim] = &r;
  }

  std::ostringstream out;
  out << std::left << std::setw(8) << "op" << std::setw(10) << "patches";
  for (auto d : dims) out << std::right << std::setw(24) << ("dim " + std::to_string(d));
  out << '\n';
  for (const auto& [key, by_dim] : rows) {
    out << std::left << std::setw(8) << to_string(static_cast<BenchOp>(key.first))
        << std::setw(10) << key.second;
    for (auto d : dims) {
      std::ostringstream cell;
      const auto it = by_dim.find(d);
      if (it == by_dim.end()) {
        cell << "-";
      } else if (it->second->error) {
        cell << "error";
      } else {
        cell << std::fixed << std::setprecision(4) << it->second->mean_ms << " ± "
             << it->second->std_ms << " ms";
      }
      // "±" occupies two bytes.
      out << std::right << std::setw(cell.str().find("±") != std::string::npos ? 25 : 24)
          << cell.str();
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace driftgate
