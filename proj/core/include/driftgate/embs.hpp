#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftgate/record.hpp"

namespace driftgate {

// EMBS embedding file (little-endian):
//   "EMBS" | u32 format_version=1 | u32 dim | u64 count
//   | count x dim f32, row-major
// Per-row metadata lives in a JSONL sidecar next to it (see sidecar_path),
// one {"frame","patch","bbox","label"} object per row. Without a sidecar,
// row i is frame i, patch 0, bbox [0,0,0,0], no label.

inline constexpr std::uint32_t kEmbsVersion = 1;
inline constexpr std::uint64_t kEmbsHeaderBytes = 20;

struct EmbsHeader {
  std::uint32_t version = kEmbsVersion;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
};

/// "data/run.embs" -> "data/run.meta.jsonl".
std::filesystem::path sidecar_path(const std::filesystem::path& embs);

/// Pull-based stream of records, in order.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual std::optional<EmbeddingRecord> next() = 0;
};

/// In-memory source over a borrowed record list.
class VectorSource final : public RecordSource {
 public:
  explicit VectorSource(std::span<const EmbeddingRecord> records) : records_(records) {}
  std::optional<EmbeddingRecord> next() override;

 private:
  std::span<const EmbeddingRecord> records_;
  std::size_t pos_ = 0;
};

/// Sequential and random-access reader for an EMBS file and its sidecar.
///
/// Opening validates the header, the payload length and the sidecar line
/// count, so a reader that opened successfully can stream every row.
class EmbsReader final : public RecordSource {
 public:
  /// `expected_dim`, when set, must match the header. Throws FormatError
  /// (bad magic, bad version, truncated, dimension or metadata mismatch) or
  /// IoError.
  explicit EmbsReader(const std::filesystem::path& path,
                      std::optional<std::uint32_t> expected_dim = std::nullopt);

  const EmbsHeader& header() const noexcept { return header_; }
  const std::filesystem::path& path() const noexcept { return path_; }
  bool has_sidecar() const noexcept { return has_sidecar_; }

  std::optional<EmbeddingRecord> next() override;

  /// Record at `row` (0-based), independent of the sequential cursor.
  EmbeddingRecord read_row(std::uint64_t row);

 private:
  EmbeddingRecord make_record(std::uint64_t row, std::vector<float> values) const;

  std::filesystem::path path_;
  std::ifstream in_;
  EmbsHeader header_;
  bool has_sidecar_ = false;
  std::vector<EmbeddingRecord> meta_;  // vectors left empty
  std::uint64_t cursor_ = 0;
};

/// Reads every record of an EMBS file.
std::vector<EmbeddingRecord> read_embedding_file(
    const std::filesystem::path& path, std::optional<std::uint32_t> expected_dim = std::nullopt);

/// Writes records as EMBS plus sidecar, both atomically. All vectors must
/// have length `dim`. The sidecar is always written.
void write_embedding_file(const std::filesystem::path& path,
                          std::span<const EmbeddingRecord> records, std::uint32_t dim);

}  // namespace driftgate
