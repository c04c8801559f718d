#pragma once

#include <cmath>
#include <cstdint>

#include "smw/linalg.hpp"

namespace smw {

/// A seeded Gaussian matrix together with its spectral norm, so that the same
/// direction can be rescaled to many target norms without another SVD.
struct GaussianDirection {
  Matrix g;
  double norm = 0.0;

  /// g * (target / ||g||_2); exactly zero for target == 0.
  Matrix scaled(double target) const {
    if (target == 0.0) return Matrix::Zero(g.rows(), g.cols());
    return g * (target / norm);
  }
};

inline GaussianDirection gaussian_direction(Index rows, Index cols,
                                            std::uint64_t seed) {
  if (rows < 1 || cols < 1)
    throw DimensionError("gaussian_direction: empty shape");
  GaussianDirection d{gaussian_matrix(rows, cols, seed), 0.0};
  d.norm = two_norm(d.g);
  return d;
}

/// Seeded standard Gaussian matrix rescaled to spectral norm `target_norm`.
inline Matrix gaussian_with_norm(Index rows, Index cols, double target_norm,
                                 std::uint64_t seed) {
  if (!std::isfinite(target_norm) || target_norm < 0.0)
    throw InvalidInputError("gaussian_with_norm: target norm must be finite "
                            "and non-negative");
  if (target_norm == 0.0) {
    if (rows < 1 || cols < 1)
      throw DimensionError("gaussian_with_norm: empty shape");
    return Matrix::Zero(rows, cols);
  }
  return gaussian_direction(rows, cols, seed).scaled(target_norm);
}

}  // namespace smw
