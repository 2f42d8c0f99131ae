#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "driftgate/record.hpp"
#include "driftgate/stats.hpp"

namespace driftgate {

/// Novelty score (z − μ)ᵀ Σ⁻¹ (z − μ) against a snapshot: the unnormalized
/// Hotelling T̃² statistic, i.e. the squared Mahalanobis distance of z to the
/// normal set. Evaluated as ‖L⁻¹(z − μ)‖² on the cached Cholesky factor.
///
/// Throws InputError on dimension mismatch or non-finite input.
double score(const Snapshot& snapshot, std::span<const double> z);
double score(const Snapshot& snapshot, std::span<const float> z);

/// Scores every column of `batch` (D x n) against one snapshot. Each entry is
/// bit-identical to score() on that column. Any invalid column fails the
/// whole batch.
std::vector<double> score_batch(const Snapshot& snapshot, const Eigen::MatrixXd& batch);

/// Accepted iff score > threshold (strictly).
Decision decide(double score, double threshold, std::uint64_t stats_version,
                std::uint64_t frame, std::uint32_t patch);

Decision decide(const Snapshot& snapshot, std::span<const double> z, double threshold,
                std::uint64_t frame, std::uint32_t patch);

}  // namespace driftgate
