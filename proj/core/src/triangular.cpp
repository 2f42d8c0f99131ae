#include "driftgate/triangular.hpp"

#include <array>
#include <cassert>

#include "driftgate/parallel.hpp"

namespace driftgate {

PackedLower::PackedLower(const Eigen::MatrixXd& lower)
    : dim_(static_cast<std::size_t>(lower.rows())),
      data_(dim_ * (dim_ + 1) / 2) {
  assert(lower.rows() == lower.cols());
  std::size_t k = 0;
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      data_[k++] = lower(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
}

Eigen::MatrixXd PackedLower::to_dense() const {
  const auto n = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      out(i, j) = at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    }
  }
  return out;
}

void PackedLower::solve_squared_norms(const Eigen::MatrixXd& centered,
                                      std::span<double> out) const {
  assert(static_cast<std::size_t>(centered.rows()) == dim_);
  assert(out.size() == static_cast<std::size_t>(centered.cols()));
  const auto n = static_cast<std::size_t>(centered.cols());
  const std::size_t panels = (n + kPanel - 1) / kPanel;
  if (panels <= 1) {
    if (n > 0) solve_panel(centered, 0, n, out);
    return;
  }
  parallel_for(panels, [&](std::size_t p) {
    const std::size_t first = p * kPanel;
    solve_panel(centered, first, std::min(kPanel, n - first), out);
  });
}

namespace {

// Eight doubles per lane; GCC/Clang lower this to the target's SIMD width.
// Each query column owns one slot of one lane, so its sums are never
// reassociated with another column's.
using Lane = double __attribute__((vector_size(64)));
constexpr std::size_t kLaneWidth = 8;
constexpr std::size_t kRowBlock = 4;

inline Lane broadcast(double v) { return Lane{} + v; }

// Forward substitution L y = d for Lanes*4 columns at once, y stored
// row-interleaved (y[i * Lanes + k]). Rows are processed kRowBlock at a time
// so every loaded y[j] feeds several rows; per column, the accumulation over
// j stays in ascending order regardless of blocking.
template <std::size_t Lanes>
void forward_solve(const double* packed, std::size_t dim, Lane* y, Lane* norm) {
  auto row_ptr = [packed](std::size_t i) { return packed + i * (i + 1) / 2; };

  std::size_t i = 0;
  for (; i + kRowBlock <= dim; i += kRowBlock) {
    Lane acc[kRowBlock][Lanes] = {};
    const double* rows[kRowBlock];
    for (std::size_t b = 0; b < kRowBlock; ++b) rows[b] = row_ptr(i + b);

    for (std::size_t j = 0; j < i; ++j) {
      const Lane* yj = y + j * Lanes;
      for (std::size_t b = 0; b < kRowBlock; ++b) {
        const Lane l = broadcast(rows[b][j]);
        for (std::size_t k = 0; k < Lanes; ++k) acc[b][k] += l * yj[k];
      }
    }
    for (std::size_t b = 0; b < kRowBlock; ++b) {
      const std::size_t r = i + b;
      for (std::size_t j = i; j < r; ++j) {
        const Lane l = broadcast(rows[b][j]);
        for (std::size_t k = 0; k < Lanes; ++k) acc[b][k] += l * y[j * Lanes + k];
      }
      const Lane diag = broadcast(rows[b][r]);
      for (std::size_t k = 0; k < Lanes; ++k) {
        Lane& v = y[r * Lanes + k];
        v = (v - acc[b][k]) / diag;
        norm[k] += v * v;
      }
    }
  }
  for (; i < dim; ++i) {
    const double* row = row_ptr(i);
    Lane acc[Lanes] = {};
    for (std::size_t j = 0; j < i; ++j) {
      const Lane l = broadcast(row[j]);
      for (std::size_t k = 0; k < Lanes; ++k) acc[k] += l * y[j * Lanes + k];
    }
    const Lane diag = broadcast(row[i]);
    for (std::size_t k = 0; k < Lanes; ++k) {
      Lane& v = y[i * Lanes + k];
      v = (v - acc[k]) / diag;
      norm[k] += v * v;
    }
  }
}

template <std::size_t Lanes>
void solve_columns(const double* packed, std::size_t dim,
                   const Eigen::MatrixXd& centered, std::size_t first,
                   std::size_t count, std::span<double> out) {
  std::vector<Lane> y(dim * Lanes, Lane{});
  for (std::size_t c = 0; c < count; ++c) {
    const auto col = static_cast<Eigen::Index>(first + c);
    for (std::size_t i = 0; i < dim; ++i) {
      y[i * Lanes + c / kLaneWidth][c % kLaneWidth] =
          centered(static_cast<Eigen::Index>(i), col);
    }
  }
  Lane norm[Lanes] = {};
  forward_solve<Lanes>(packed, dim, y.data(), norm);
  for (std::size_t c = 0; c < count; ++c) {
    out[first + c] = norm[c / kLaneWidth][c % kLaneWidth];
  }
}

constexpr std::size_t kWideLanes = PackedLower::kPanel / kLaneWidth;

}  // namespace

void PackedLower::solve_panel(const Eigen::MatrixXd& centered, std::size_t first,
                              std::size_t count, std::span<double> out) const {
  if (count <= kLaneWidth) {
    solve_columns<1>(data_.data(), dim_, centered, first, count, out);
  } else {
    solve_columns<kWideLanes>(data_.data(), dim_, centered, first, count, out);
  }
}

}  // namespace driftgate
