#pragma once

#include <filesystem>
#include <iosfwd>

#include "driftgate/stats.hpp"

namespace driftgate {

// Checkpoint layout (little-endian):
//   "MSNS" | u32 version=1 | u32 dim | u64 count | f64 alpha
//   | dim x f64 sum_b | dim*(dim+1)/2 x f64 lower triangle of sum_A, row by row
//   | u32 reservoir count | count x dim f64 rows
// The factorization is not stored; it is rebuilt on first use.

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const NormalStats& stats, std::ostream& out);
void save_checkpoint(const NormalStats& stats, const std::filesystem::path& path);

/// `policy` governs shrinkage for updates after loading; the stored alpha is
/// kept until then. Throws FormatError on malformed input.
NormalStats read_checkpoint(std::istream& in, const AlphaPolicy& policy,
                            const std::string& name = "checkpoint");
NormalStats load_checkpoint(const std::filesystem::path& path, const AlphaPolicy& policy);

}  // namespace driftgate
