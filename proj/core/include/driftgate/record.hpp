#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace driftgate {

/// Patch rectangle in source-image pixels, upper-left anchored.
struct BBox {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  std::uint32_t w = 0;
  std::uint32_t h = 0;

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// One embedded patch with its provenance. `row` is the position of the
/// vector in the file it was read from and survives replication, so
/// manifests can refer back to the stored vector.
struct EmbeddingRecord {
  std::uint64_t frame = 0;
  std::uint32_t patch = 0;
  BBox bbox;
  std::optional<std::string> label;
  std::vector<float> vector;
  std::uint64_t row = 0;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

/// Outcome of scoring one patch.
struct Decision {
  std::uint64_t frame = 0;
  std::uint32_t patch = 0;
  double score = 0.0;
  double threshold = 0.0;
  bool accepted = false;
  std::uint64_t stats_version = 0;

  friend bool operator==(const Decision&, const Decision&) = default;
};

/// Throws InputError unless every entry is finite.
void require_finite(std::span<const float> values, std::string_view what);
void require_finite(std::span<const double> values, std::string_view what);

}  // namespace driftgate
