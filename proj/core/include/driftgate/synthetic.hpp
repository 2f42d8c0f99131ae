#pragma once

#include <cstdint>
#include <vector>

#include "driftgate/record.hpp"

namespace driftgate {

/// Seeded Gaussian-mixture stream standing in for real patch embeddings.
///
/// Class c has a center drawn from N(0, center_scale² I) and members drawn
/// from N(center, spread² I). Class frequencies follow weight c ∝
/// imbalance^c (imbalance = 1 gives uniform classes). Labels are "c0", "c1",
/// ...; records are grouped `patches_per_frame` to a frame.
struct SyntheticSpec {
  std::size_t records = 1000;
  std::uint32_t dim = 32;
  std::size_t classes = 8;
  double center_scale = 10.0;
  double spread = 1.0;
  double imbalance = 1.0;
  std::uint32_t patches_per_frame = 1;
  std::uint64_t seed = 0;
};

std::vector<EmbeddingRecord> generate_synthetic(const SyntheticSpec& spec);

}  // namespace driftgate
