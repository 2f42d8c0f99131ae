#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftgate/metrics.hpp"
#include "driftgate/pipeline.hpp"
#include "driftgate/stats.hpp"
#include "driftgate/synthetic.hpp"

namespace driftgate {

struct StatsConfig {
  std::uint32_t dim = 2560;
  GaussianInit init;
  AlphaPolicy policy = LedoitWolfAlpha{};
};

struct PipelineConfig {
  double threshold = 2500.0;
  /// EMBS file to read; empty means use the synthetic source.
  std::string input;
};

/// Redundancy/threshold sweep. Every (factor, threshold, seed) cell starts
/// from a freshly initialized model with the same init seed.
struct ExperimentConfig {
  StatsConfig stats;
  PipelineConfig pipeline;
  std::vector<std::uint32_t> redundancy_factors{1, 2, 4, 8, 16};
  std::vector<double> thresholds{2500, 5000, 10000, 15000, 30000};
  std::vector<std::uint64_t> seeds{0};
  bool shuffle = true;
  std::optional<std::uint64_t> pair_budget = 100'000;
  std::optional<SyntheticSpec> synthetic;
};

/// Throws InputError on empty lists, zero factors or non-positive thresholds.
void validate(const ExperimentConfig& config);

/// `rf` copies of every record. Without shuffling, copy k keeps the frame
/// grouping with frame indices offset past copy k-1 (rf = 1 is the identity).
/// With shuffling, the replicated records are permuted with a seeded
/// generator and re-framed one record per frame.
std::vector<EmbeddingRecord> replicate_stream(std::span<const EmbeddingRecord> source,
                                              std::uint32_t rf, std::uint64_t seed,
                                              bool shuffle);

/// Writes frame_index, cumulative_selected, cumulative_redundant,
/// cumulative_total as CSV, atomically.
void export_selection_curve(const StreamSummary& summary, const std::filesystem::path& path);

/// Balance and diversity of one dataset. `balance` is absent when no record
/// carries a label.
struct DatasetMetrics {
  std::optional<BalanceReport> balance;
  DiversityReport diversity;
  std::uint64_t unlabeled = 0;
};

DatasetMetrics measure(std::span<const EmbeddingRecord> records, const DiversityOptions& options);

struct NoveltyCell {
  std::uint32_t rf = 1;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::string> error;
  std::uint64_t stream_size = 0;
  std::uint64_t retained = 0;
  double reduction_rate = 0.0;  // percent of patches discarded
  StreamSummary summary;
  DatasetMetrics metrics;
};

/// Uniform random subset of the replicated stream, sized to match a novelty
/// cell.
struct RandomBaseline {
  std::uint32_t rf = 1;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  std::optional<std::string> error;
  std::uint64_t retained = 0;
  double reduction_rate = 0.0;
  DatasetMetrics metrics;
};

struct AllData {
  std::uint32_t rf = 1;
  std::optional<std::string> error;
  std::uint64_t size = 0;
  DatasetMetrics metrics;
};

struct ExperimentReport {
  std::vector<NoveltyCell> novelty;
  std::vector<RandomBaseline> random;
  std::vector<AllData> all;

  std::size_t dataset_count() const noexcept {
    return novelty.size() + random.size() + all.size();
  }
};

/// Runs the whole sweep over `source`. When `out_dir` is set, writes
///   <out>/rf<k>/t<T>/seed<s>/{decisions.jsonl, manifest.jsonl, curve.csv,
///                             metrics.json, random_manifest.jsonl,
///                             random_metrics.json}
///   <out>/rf<k>/all/metrics.json
///   <out>/report.json, <out>/report.txt
/// Manifests reference `source_file`; pass an empty path to have the source
/// written to <out>/source.embs first. Failures inside a cell are recorded
/// in that cell and do not stop the sweep.
ExperimentReport run_experiment(const ExperimentConfig& config,
                                std::span<const EmbeddingRecord> source,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                                const std::filesystem::path& source_file = {});

std::string report_json(const ExperimentReport& report, int indent = 2);
/// Per-factor balance and diversity tables (metric rows x reduction-rate
/// columns), averaged over seeds.
std::string report_tables(const ExperimentReport& report);

/// "t2500", "t0.5": directory name for a threshold.
std::string threshold_tag(double threshold);

}  // namespace driftgate
