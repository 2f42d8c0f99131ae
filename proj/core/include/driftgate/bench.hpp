#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace driftgate {

enum class BenchOp { Score, Absorb };

std::string to_string(BenchOp op);

struct BenchResult {
  BenchOp op = BenchOp::Score;
  std::uint32_t dim = 0;
  std::uint32_t patch_count = 0;
  std::uint32_t samples = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;  // sample std over per-iteration timings
  std::optional<std::string> error;
};

struct BenchOptions {
  std::vector<std::uint32_t> dims{128, 512, 2560};
  std::vector<std::uint32_t> patch_counts{1, 4, 16, 64};
  std::uint32_t reps = 30;
  std::uint32_t warmup = 3;
  /// Score with all worker threads instead of one.
  bool parallel = false;
  std::uint64_t seed = 0;
};

inline constexpr std::uint32_t kMinBenchReps = 30;

/// Times score_batch and absorb (including the refactorization the next score
/// needs) for every (dim, patch_count). Results are ordered score block
/// first, then absorb, each by dim then patch count. Throws InputError when
/// reps < 30 or a list is empty; failures inside a scenario are recorded in
/// its result.
std::vector<BenchResult> run_bench(const BenchOptions& options);

/// op,dim,patch_count,samples,mean_ms,std_ms,error
std::string bench_csv(const std::vector<BenchResult>& results);
void write_bench_csv(const std::vector<BenchResult>& results, const std::filesystem::path& path);

/// Text table: one row per (op, patch count), one column per dim.
std::string bench_table(const std::vector<BenchResult>& results);

}  // namespace driftgate
