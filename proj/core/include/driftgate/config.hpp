#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "driftgate/harness.hpp"

namespace driftgate {

// TOML layout, every key optional:
//
//   [stats]     dim, m0, sigma, seed, alpha ("ledoit-wolf" or a number), reservoir
//   [pipeline]  threshold, input
//   [sweep]     redundancy_factors, thresholds, seeds, shuffle,
//               pair_budget (positive integer, or "all" to enumerate every pair)
//   [synthetic] records, dim, classes, center_scale, spread, imbalance,
//               patches_per_frame, seed
//
// Syntax errors raise FormatError (Malformed) with "name:line:column".
// Unknown keys and out-of-range values raise InputError.

ExperimentConfig parse_config(std::string_view text, const std::string& name = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// "ledoit-wolf", "ledoit-wolf:R" or a fixed alpha in [0, 1].
AlphaPolicy parse_alpha_policy(std::string_view text);

}  // namespace driftgate
