#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftgate/record.hpp"

namespace driftgate {

/// Samples per class. Classes absent from a dataset are simply not present;
/// a zero count is treated the same way.
struct ClassHistogram {
  std::map<std::string, std::uint64_t> counts;
};

/// Histogram over labeled records; unlabeled records are skipped and counted
/// in `unlabeled` when provided.
ClassHistogram histogram_of(std::span<const EmbeddingRecord> records,
                            std::uint64_t* unlabeled = nullptr);

struct BalanceReport {
  double cv = 0.0;                  // population std of counts / mean count
  double normalized_entropy = 1.0;  // H / log N, natural log
  double imbalance_ratio = 1.0;     // max count / min count
  std::size_t classes = 0;
  std::uint64_t samples = 0;
};

/// Throws InputError when no class has a positive count.
BalanceReport balance(const ClassHistogram& hist);

struct PairStats {
  double mean = 0.0;
  double std = 0.0;  // population std over the pairs used
};

struct ClassDiversity {
  std::string label;
  std::size_t members = 0;
  std::uint64_t pairs_total = 0;
  std::uint64_t pairs_used = 0;
  bool sampled = false;
  PairStats cosine;
  PairStats distance;
};

struct DiversityReport {
  std::vector<ClassDiversity> classes;  // sorted by label
  std::vector<std::string> excluded;    // classes with fewer than 2 members
  bool sampled = false;                 // any class used a pair subsample
  /// Mean over classes of the per-class means, and the std of those means
  /// across classes (not across pairs).
  PairStats macro_cosine;
  PairStats macro_distance;
};

struct DiversityOptions {
  /// Maximum pairs per class; nullopt enumerates every pair.
  std::optional<std::uint64_t> pair_budget = 100'000;
  std::uint64_t seed = 0;
};

/// Average pairwise cosine similarity and Euclidean distance within each
/// labeled class. Classes over budget use a seeded uniform subsample of
/// distinct pairs. Throws InputError on a zero vector (cosine undefined),
/// naming the offending record.
DiversityReport diversity(std::span<const EmbeddingRecord> records,
                          const DiversityOptions& options = {});

std::string to_json(const BalanceReport& report, int indent = -1);
std::string to_json(const DiversityReport& report, int indent = -1);

/// "mean ± std" cell of a metric table.
struct MetricCell {
  double mean = 0.0;
  double std = 0.0;
  bool present = true;
};

/// Aligned text table: one row per metric, one column per dataset (for
/// example, one per reduction rate).
std::string render_metric_table(const std::vector<std::string>& row_names,
                                const std::vector<std::string>& column_names,
                                const std::vector<std::vector<MetricCell>>& cells,
                                int precision = 2);

}  // namespace driftgate
