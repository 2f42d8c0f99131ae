#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "driftgate/triangular.hpp"

namespace driftgate {

/// Shrinkage intensity held constant.
struct FixedAlpha {
  double alpha = 0.1;
};

/// Shrinkage intensity re-estimated with the Ledoit–Wolf formula after every
/// update, from a uniform reservoir of absorbed vectors.
struct LedoitWolfAlpha {
  std::size_t reservoir_capacity = 1024;
};

using AlphaPolicy = std::variant<FixedAlpha, LedoitWolfAlpha>;

/// Seeded zero-mean isotropic Gaussian draws used as the initial normal set.
struct GaussianInit {
  std::size_t samples = 64;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

/// (1 - alpha) * cov + alpha * (trace(cov) / D) * I.
///
/// Throws InputError if `cov` is not square, not symmetric to 1e-9 relative,
/// or alpha is outside [0, 1]; DegenerateModelError if trace(cov) <= 0.
Eigen::MatrixXd shrink(const Eigen::MatrixXd& cov, double alpha);

/// Ledoit–Wolf shrinkage intensity towards the scaled identity for the
/// columns of `samples` (D x n) centered at `center`, clamped to [0, 1].
/// Returns 0 when the samples carry no dispersion.
double ledoit_wolf_alpha(const Eigen::MatrixXd& samples, const Eigen::VectorXd& center);

/// Immutable, versioned view of the model used for scoring. Safe to share
/// between threads.
class Snapshot {
 public:
  Snapshot(std::uint64_t version, double alpha, Eigen::VectorXd mean, PackedLower factor)
      : version_(version), alpha_(alpha), mean_(std::move(mean)), factor_(std::move(factor)) {}

  std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }
  std::uint64_t version() const noexcept { return version_; }
  double alpha() const noexcept { return alpha_; }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const PackedLower& factor() const noexcept { return factor_; }

 private:
  std::uint64_t version_;
  double alpha_;
  Eigen::VectorXd mean_;
  PackedLower factor_;
};

using SnapshotPtr = std::shared_ptr<const Snapshot>;

/// Streaming sufficient statistics of the normal set.
///
/// Keeps count M, b = Σz and A = Σzzᵀ in double precision. Mean and
/// covariance are derived from them on demand:
///
///   μ = b / M
///   Σ̂ = (A − μbᵀ − bμᵀ + Mμμᵀ) / (M − 1)
///
/// so any partition of the same samples into update batches gives the same
/// model up to rounding. Scoring goes through snapshot(), which factorizes the
/// shrunk covariance lazily, once per version.
///
/// One writer (absorb) and any number of concurrent snapshot() callers.
class NormalStats {
 public:
  NormalStats(std::size_t dim, AlphaPolicy policy);

  NormalStats(const NormalStats& other);
  NormalStats& operator=(const NormalStats& other);
  NormalStats(NormalStats&&) noexcept;
  NormalStats& operator=(NormalStats&&) noexcept;
  ~NormalStats();

  /// Model seeded with `init.samples` Gaussian draws absorbed through the
  /// regular update path. The result is verified to factorize.
  static NormalStats init_gaussian(std::size_t dim, const GaussianInit& init,
                                   AlphaPolicy policy);

  /// Rebuilds a model from persisted sums (see checkpoint.hpp). `alpha` is
  /// used as-is until the next update.
  static NormalStats restore(std::size_t dim, std::uint64_t count, double alpha,
                             Eigen::VectorXd sum_b, Eigen::MatrixXd sum_A,
                             std::vector<Eigen::VectorXd> reservoir, AlphaPolicy policy);

  /// Adds the columns of `batch` (D x K) to the model. Requires count() >= 2.
  /// Validation happens before any state changes.
  void absorb(const Eigen::MatrixXd& batch);

  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t count() const noexcept { return count_; }
  std::uint64_t version() const noexcept { return version_; }
  double alpha() const noexcept { return alpha_; }
  const AlphaPolicy& policy() const noexcept { return policy_; }

  const Eigen::VectorXd& sum_b() const noexcept { return sum_b_; }
  /// Σzzᵀ with both triangles populated.
  Eigen::MatrixXd sum_A() const;
  /// Lower triangle of Σzzᵀ; the strict upper part is unspecified.
  const Eigen::MatrixXd& sum_A_lower() const noexcept { return sum_A_; }

  Eigen::VectorXd mean() const;
  Eigen::MatrixXd empirical_covariance() const;
  Eigen::MatrixXd shrunk_covariance() const;

  const std::vector<Eigen::VectorXd>& reservoir() const noexcept { return reservoir_; }
  std::size_t reservoir_capacity() const noexcept;

  /// Current scoring view, factorizing if the model changed since the last
  /// call. Throws DegenerateModelError (carrying the version) if the shrunk
  /// covariance has zero trace or is not positive definite.
  SnapshotPtr snapshot() const;

 private:
  void accumulate(const Eigen::MatrixXd& batch);
  void refresh_alpha();

  std::size_t dim_;
  AlphaPolicy policy_;
  std::uint64_t count_ = 0;
  std::uint64_t version_ = 0;
  double alpha_ = 0.0;
  Eigen::VectorXd sum_b_;
  Eigen::MatrixXd sum_A_;
  std::vector<Eigen::VectorXd> reservoir_;

  mutable std::mutex cache_mutex_;
  mutable SnapshotPtr cached_;
};

}  // namespace driftgate
