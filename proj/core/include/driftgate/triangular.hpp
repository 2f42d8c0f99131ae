#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace driftgate {

/// Lower-triangular Cholesky factor L (Σ = L Lᵀ) packed row by row.
///
/// Queries are solved in column panels (up to kPanel columns, zero padded).
/// Each column occupies its own SIMD slot and undergoes the same sequence of
/// floating-point operations whatever panel it lands in, so a vector scored
/// alone and the same vector scored inside a batch give bit-identical results.
class PackedLower {
 public:
  static constexpr std::size_t kPanel = 32;

  PackedLower() = default;

  /// Copies the lower triangle of `lower` (upper part ignored).
  explicit PackedLower(const Eigen::MatrixXd& lower);

  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return dim_ == 0; }

  double at(std::size_t i, std::size_t j) const noexcept {
    return j > i ? 0.0 : data_[i * (i + 1) / 2 + j];
  }

  Eigen::MatrixXd to_dense() const;

  /// For every column d of `centered` (dim × n) writes ‖L⁻¹d‖² to out[col].
  void solve_squared_norms(const Eigen::MatrixXd& centered,
                           std::span<double> out) const;

 private:
  void solve_panel(const Eigen::MatrixXd& centered, std::size_t first,
                   std::size_t count, std::span<double> out) const;

  std::size_t dim_ = 0;
  std::vector<double> data_;
};

}  // namespace driftgate
