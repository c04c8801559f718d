#pragma once

// Controlled error injection: A~^{-1} = A^{-1} + E1 and
// Z^{-1} = (I + V^T A~^{-1} U)^{-1} + E2 with ||E1||_2, ||E2||_2 prescribed
// exactly. E2 perturbs the inverse of the *perturbed* capacitance.

#include <cmath>
#include <cstdint>
#include <utility>

#include "smw/linalg.hpp"
#include "smw/noise.hpp"
#include "smw/random.hpp"
#include "smw/woodbury.hpp"

namespace smw {

struct PerturbationSpec {
  double eps1 = 0.0;
  double eps2 = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!std::isfinite(eps1) || eps1 < 0.0 || !std::isfinite(eps2) ||
        eps2 < 0.0)
      throw InvalidInputError(
          "PerturbationSpec: eps1 and eps2 must be finite and >= 0");
  }
};

/// Unit-norm-independent Gaussian directions for E1 (n x n) and E2 (k x k).
/// Sweeps reuse one pair per trial and rescale it for every grid point.
struct PerturbationDirections {
  GaussianDirection e1;
  GaussianDirection e2;
};

inline PerturbationDirections perturbation_directions(Index n, Index k,
                                                      std::uint64_t seed) {
  return {gaussian_direction(n, n, seed ^ stream::e1),
          gaussian_direction(k, k, seed ^ stream::e2)};
}

/// Independent Gaussian U, V (n x k), each rescaled to two-norm sqrt(lambda).
inline std::pair<Matrix, Matrix> make_update_pair(Index n, Index k,
                                                  double lambda,
                                                  std::uint64_t seed) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InvalidInputError("make_update_pair: lambda must be positive");
  if (k < 1 || k > n)
    throw DimensionError("make_update_pair: need 1 <= k <= n");
  const double root = std::sqrt(lambda);
  return {gaussian_with_norm(n, k, root, seed ^ stream::update_u),
          gaussian_with_norm(n, k, root, seed ^ stream::update_v)};
}

/// Perturb with precomputed directions (their seeds were fixed when drawn).
inline ProblemInstance perturb_instance(const ProblemPtr& problem,
                                        double eps1, double eps2,
                                        const PerturbationDirections& dirs) {
  PerturbationSpec{eps1, eps2, 0}.validate();
  const UpdateProblem& p = *problem;
  if (dirs.e1.g.rows() != p.n() || dirs.e2.g.rows() != p.k())
    throw DimensionError("perturb_instance: direction shapes do not match");
  Matrix a_inv_approx = p.a_inv() + dirs.e1.scaled(eps1);
  const Matrix c_tilde = capacitance(a_inv_approx, p.u(), p.v());
  Matrix z_inv;
  try {
    z_inv = invert(c_tilde);
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(
        "perturb_instance: perturbed capacitance is singular", e.sigma_min(),
        e.tolerance());
  }
  z_inv += dirs.e2.scaled(eps2);
  return ProblemInstance(problem, std::move(a_inv_approx), std::move(z_inv));
}

inline ProblemInstance perturb_instance(const ProblemPtr& problem,
                                        const PerturbationSpec& spec) {
  spec.validate();
  return perturb_instance(problem, spec.eps1, spec.eps2,
                          perturbation_directions(problem->n(), problem->k(),
                                                  spec.seed));
}

inline ProblemInstance perturb_instance(const Matrix& a, const Matrix& u,
                                        const Matrix& v,
                                        const PerturbationSpec& spec) {
  return perturb_instance(UpdateProblem::create(a, u, v), spec);
}

/// Perturbation of A itself, as used by the improved two-norm backward bound:
/// A~ = A + E with ||E||_2 = eps_a, A~^{-1} its exact inverse, and
/// Z^{-1} = (I + V^T A~^{-1} U)^{-1} + E2.
struct MatrixSidePerturbation {
  Matrix a_tilde;
  Matrix a_tilde_inv;
  Matrix z_inv;
};

inline MatrixSidePerturbation perturb_matrix_side(const Matrix& a,
                                                  const Matrix& u,
                                                  const Matrix& v,
                                                  const PerturbationSpec& spec) {
  spec.validate();
  require_square(a, "perturb_matrix_side: a");
  MatrixSidePerturbation out;
  out.a_tilde =
      a + gaussian_with_norm(a.rows(), a.cols(), spec.eps1, spec.seed ^ stream::e1);
  out.a_tilde_inv = invert(out.a_tilde);
  out.z_inv = invert(capacitance(out.a_tilde_inv, u, v)) +
              gaussian_with_norm(u.cols(), u.cols(), spec.eps2,
                                 spec.seed ^ stream::e2);
  return out;
}

}  // namespace smw
