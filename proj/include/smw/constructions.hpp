#pragma once

// Engineered (A, U, V) families that pin an extreme singular value of the
// capacitance matrix: alpha = ||C^{-1}||_2 for forward experiments and
// beta = ||C||_2 for backward experiments.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "smw/linalg.hpp"
#include "smw/noise.hpp"
#include "smw/random.hpp"

namespace smw {

class ConstructionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct ConstructedInstance {
  Matrix a;
  Matrix u;
  Matrix v;
  /// Accurate inverse of `a`, assembled from its factors.
  Matrix a_inv;
  /// The k x k capacitance I + V^T A^{-1} U evaluated from the matrices.
  Matrix capacitance;
};

// ---------------------------------------------------------------------------
// Forward family

struct ForwardConstructionParams {
  Index n = 0;
  Index k = 0;
  double alpha_target = 1.0;
  double lambda = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 2 || k < 1 || k > n)
      throw DimensionError("ForwardConstructionParams: need 1 <= k <= n, n >= 2");
    if (!(alpha_target > 0.0) || !std::isfinite(alpha_target))
      throw ConstructionError("ForwardConstructionParams: alpha must be > 0");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw InvalidInputError("ForwardConstructionParams: lambda must be > 0");
  }
};

/// Singular values of A in the forward family: 10^2 down to 10^-2.
inline Vector forward_singular_values(Index n) { return logspace(2.0, -2.0, n); }

/// Diagonal of S restricted to its last k entries (the only nonzero ones).
inline Vector forward_s_block(Index n, Index k, double alpha, double lambda) {
  const Vector sigma = forward_singular_values(n);
  const double g = 1.0 / alpha - 1.0;
  Vector d(k);
  d(0) = lambda;
  for (Index j = 1; j + 1 < k; ++j) d(j) = std::abs(g) * sigma(n - k + j);
  if (k > 1) d(k - 1) = g * sigma(n - 1);
  return d;
}

/// ||V||_2 of the forward family, i.e. its measured lambda (||U||_2 = 1).
inline double forward_construction_lambda(Index n, Index k, double alpha,
                                          double lambda) {
  return forward_s_block(n, k, alpha, lambda).cwiseAbs().maxCoeff();
}

/// A = U_A diag(logspace(2,-2,n)) V_A^T, U = U_A Q, V = V_A S Q with Q^T = [0; I_k].
/// Throws ConstructionError unless sigma_min(I + V^T A^{-1} U) = 1/alpha to 1e-8.
inline ConstructedInstance build_forward_instance(
    const ForwardConstructionParams& p) {
  p.validate();
  const Index n = p.n, k = p.k;
  const Matrix ua = orthonormal_from_gaussian(n, p.seed ^ stream::left_basis);
  const Matrix va = orthonormal_from_gaussian(n, p.seed ^ stream::right_basis);
  const Vector sigma = forward_singular_values(n);
  const Vector s = forward_s_block(n, k, p.alpha_target, p.lambda);

  ConstructedInstance c;
  c.a = ua * sigma.asDiagonal() * va.transpose();
  c.a_inv = va * sigma.cwiseInverse().asDiagonal() * ua.transpose();
  c.u = ua.rightCols(k);
  c.v = va.rightCols(k) * s.asDiagonal();
  c.capacitance = Matrix::Identity(k, k) +
                  c.v.transpose() * (c.a_inv * c.u);

  const double target = 1.0 / p.alpha_target;
  const double got = sigma_min(c.capacitance);
  if (!(std::abs(got - target) <= 1e-8 * target))
    throw ConstructionError(
        "build_forward_instance: sigma_min(capacitance) = " +
        std::to_string(got) + " but 1/alpha = " + std::to_string(target) +
        " (n=" + std::to_string(n) + ", k=" + std::to_string(k) +
        ", lambda=" + std::to_string(p.lambda) + ")");
  return c;
}

// ---------------------------------------------------------------------------
// Backward family

enum class BackwardRegime { small_update, large_update };

inline const char* to_string(BackwardRegime r) {
  return r == BackwardRegime::small_update ? "small-update" : "large-update";
}

struct BackwardConstructionParams {
  Index n = 0;
  Index k = 0;
  double lambda = 1.0;
  Index block_offset = 0;
  BackwardRegime regime = BackwardRegime::small_update;
  std::uint64_t seed = 0;

  void validate() const {
    if (n < 1 || k < 1 || k > n)
      throw DimensionError("BackwardConstructionParams: need 1 <= k <= n");
    if (block_offset < 0 || block_offset + k > n)
      throw DimensionError("BackwardConstructionParams: block offset " +
                           std::to_string(block_offset) + " with k=" +
                           std::to_string(k) + " exceeds n=" +
                           std::to_string(n));
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw InvalidInputError("BackwardConstructionParams: lambda must be > 0");
  }
};

/// Diagonal of A. Small update: int(0.6 n) entries from 1e-2 to 1e-8, the rest
/// exactly 1e-8. Large update: 1e2 down to 1e-2.
inline Vector backward_diagonal(Index n, BackwardRegime regime) {
  if (regime == BackwardRegime::large_update) return logspace(2.0, -2.0, n);
  const auto head = static_cast<Index>(0.6 * static_cast<double>(n));
  Vector d = Vector::Constant(n, 1e-8);
  if (head > 0) d.head(head) = logspace(-2.0, -8.0, head);
  return d;
}

/// U = A Q, V = Q S^T with Q^T = [0; I_k; 0] starting at block_offset and S a
/// seeded Gaussian scaled to ||S||_2 = lambda/||U||_2, so the capacitance is
/// exactly I + S. The same seed gives the same S direction at every offset.
inline ConstructedInstance build_backward_instance(
    const BackwardConstructionParams& p) {
  p.validate();
  const Index n = p.n, k = p.k, off = p.block_offset;
  const Vector diag = backward_diagonal(n, p.regime);

  ConstructedInstance c;
  c.a = diag.asDiagonal();
  c.a_inv = diag.cwiseInverse().asDiagonal();
  c.u = Matrix::Zero(n, k);
  for (Index j = 0; j < k; ++j) c.u(off + j, j) = diag(off + j);
  const double norm_u = diag.segment(off, k).cwiseAbs().maxCoeff();
  const Matrix s = gaussian_direction(k, k, p.seed ^ stream::small_core)
                       .scaled(p.lambda / norm_u);
  c.v = Matrix::Zero(n, k);
  c.v.middleRows(off, k) = s.transpose();
  c.capacitance = Matrix::Identity(k, k) +
                  c.v.transpose() * (c.a_inv * c.u);

  const Matrix expected = Matrix::Identity(k, k) + s;
  const double residual = (c.capacitance - expected).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-12 * std::max(1.0, expected.cwiseAbs().maxCoeff())))
    throw ConstructionError("build_backward_instance: capacitance differs "
                            "from I + S by " + std::to_string(residual));
  return c;
}

/// The k x k core S of a backward instance.
inline Matrix backward_core(const ConstructedInstance& c) {
  return c.capacitance -
         Matrix::Identity(c.capacitance.rows(), c.capacitance.cols());
}

/// floor(n/4), floor(n/4) + k, ... up to floor(3n/4), keeping only offsets
/// whose k-block fits inside n rows.
inline std::vector<Index> sweep_offsets(Index n, Index k) {
  if (k < 1 || 2 * k > n)
    throw DimensionError("sweep_offsets: need 1 <= k <= n/2");
  std::vector<Index> out;
  for (Index off = n / 4; off <= (3 * n) / 4 && off + k <= n; off += k)
    out.push_back(off);
  return out;
}

}  // namespace smw
