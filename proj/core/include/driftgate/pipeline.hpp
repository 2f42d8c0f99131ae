#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftgate/embs.hpp"
#include "driftgate/record.hpp"
#include "driftgate/stats.hpp"

namespace driftgate {

/// One point of the selection curve. `frame_index` is the 1-based position of
/// the frame in the stream, so selected + redundant == frame_index.
struct CurvePoint {
  std::uint64_t frame_index = 0;
  std::uint64_t cumulative_selected = 0;
  std::uint64_t cumulative_redundant = 0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct StreamSummary {
  std::uint64_t frames_seen = 0;
  std::uint64_t frames_recorded = 0;
  std::uint64_t patches_seen = 0;
  std::uint64_t patches_accepted = 0;
  std::vector<CurvePoint> selection_curve;

  std::uint64_t frames_discarded() const noexcept { return frames_seen - frames_recorded; }
};

/// Receivers for the filter's outputs. Either may be empty.
struct FilterSinks {
  /// Called once per patch, in stream order.
  std::function<void(const Decision&)> on_decision;
  /// Called for every record of a recorded frame, after its update.
  std::function<void(const EmbeddingRecord&)> on_record;
};

/// Runs the record/discard loop over a frame-grouped stream.
///
/// Consecutive records with the same frame index form a frame; their patch
/// indices must run 0, 1, 2, ... Per frame, every patch is scored against the
/// current snapshot. If any score exceeds `threshold` the frame is recorded:
/// the exceeding patches are absorbed into `stats` as one batch and all of
/// the frame's records go to `on_record`. Otherwise the frame is discarded
/// and `stats` is untouched.
///
/// Throws InputError for out-of-order frames, non-contiguous patches or
/// dimension mismatches; IoError (carrying the last completed frame) when a
/// sink fails; DegenerateModelError if the model cannot be factorized.
StreamSummary run_filter(RecordSource& stream, NormalStats& stats, double threshold,
                         const FilterSinks& sinks = {});

/// Streams decisions to a JSONL file through a temporary that is renamed into
/// place by commit(). Destroying an uncommitted writer removes the temporary.
class DecisionLogWriter {
 public:
  explicit DecisionLogWriter(std::filesystem::path path);
  ~DecisionLogWriter();
  DecisionLogWriter(const DecisionLogWriter&) = delete;
  DecisionLogWriter& operator=(const DecisionLogWriter&) = delete;

  void write(const Decision& d);
  void commit();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

std::vector<Decision> read_decision_log(const std::filesystem::path& path);

/// Retained record descriptor; the vector is referenced by source file and
/// row rather than copied.
struct ManifestEntry {
  std::uint64_t frame = 0;
  std::uint32_t patch = 0;
  BBox bbox;
  std::optional<std::string> label;
  std::string source;
  std::uint64_t row = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

ManifestEntry make_manifest_entry(const EmbeddingRecord& rec, const std::string& source);

/// Writes entries sorted by (frame, patch), one JSON object per line,
/// atomically. An empty list produces an empty file.
void write_manifest(std::span<const ManifestEntry> entries, const std::filesystem::path& path);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Loads the vectors a manifest refers to. Entries with an empty source are
/// resolved against `default_source`.
std::vector<EmbeddingRecord> resolve_manifest(std::span<const ManifestEntry> entries,
                                              const std::filesystem::path& default_source = {});

/// Stacks record vectors as columns of a D x n double matrix.
Eigen::MatrixXd to_matrix(std::span<const EmbeddingRecord> records);

}  // namespace driftgate
