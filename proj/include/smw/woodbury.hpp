#pragma once

// The Sherman-Morrison-Woodbury update B^{-1} = A^{-1} - A^{-1} U C^{-1} V^T A^{-1}
// with capacitance C = I + V^T A^{-1} U, in exact and approximate form.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>

#include "smw/linalg.hpp"
#include "smw/noise.hpp"

namespace smw {

namespace detail {

inline void check_update_shapes(const Matrix& a_inv, const Matrix& u,
                                const Matrix& v, const char* what) {
  if (a_inv.rows() != a_inv.cols() || u.rows() != a_inv.rows() ||
      v.rows() != a_inv.rows() || u.cols() != v.cols() || u.cols() < 1)
    throw DimensionError(std::string(what) + ": expected n x n inverse and n x k "
                         "updates, got " + std::to_string(a_inv.rows()) + "x" +
                         std::to_string(a_inv.cols()) + ", " +
                         std::to_string(u.rows()) + "x" +
                         std::to_string(u.cols()) + ", " +
                         std::to_string(v.rows()) + "x" +
                         std::to_string(v.cols()));
}

inline bool full_column_rank(const Matrix& m) {
  if (m.cols() > m.rows()) return false;
  const Vector s = singular_values(m);
  return s(s.size() - 1) > rank_tolerance(s, m.rows(), m.cols());
}

}  // namespace detail

/// I + v^T a_inv u.
inline Matrix capacitance(const Matrix& a_inv, const Matrix& u,
                          const Matrix& v) {
  detail::check_update_shapes(a_inv, u, v, "capacitance");
  const Matrix w = a_inv * u;
  return Matrix::Identity(u.cols(), u.cols()) + v.transpose() * w;
}

/// a_inv - a_inv u C^{-1} v^T a_inv. Throws SingularMatrixError (carrying
/// sigma_min(C)) when the capacitance is singular within tolerance.
inline Matrix smw_inverse_exact(const Matrix& a_inv, const Matrix& u,
                                const Matrix& v) {
  detail::check_update_shapes(a_inv, u, v, "smw_inverse_exact");
  const Matrix w = a_inv * u;
  const Matrix y = v.transpose() * a_inv;
  const Matrix c = Matrix::Identity(u.cols(), u.cols()) + v.transpose() * w;
  Matrix c_inv;
  try {
    c_inv = invert(c);
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError("smw_inverse_exact: capacitance is singular",
                              e.sigma_min(), e.tolerance());
  }
  return a_inv - (w * c_inv) * y;
}

/// The approximate update with a caller-supplied capacitance inverse.
/// Evaluation order is fixed: W = a_inv u, Y = v^T a_inv, a_inv - (W z_inv) Y.
inline Matrix smw_inverse_approx(const Matrix& a_inv_approx, const Matrix& u,
                                 const Matrix& v, const Matrix& z_inv) {
  detail::check_update_shapes(a_inv_approx, u, v, "smw_inverse_approx");
  if (z_inv.rows() != u.cols() || z_inv.cols() != u.cols())
    throw DimensionError("smw_inverse_approx: z_inv must be k x k");
  const Matrix w = a_inv_approx * u;
  const Matrix y = v.transpose() * a_inv_approx;
  return a_inv_approx - (w * z_inv) * y;
}

/// An update problem B = A + U V^T with its exact inverses and the scalar
/// quantities every bound consumes. Immutable; share it via shared_ptr.
class UpdateProblem {
 public:
  static std::shared_ptr<const UpdateProblem> create(Matrix a, Matrix u,
                                                     Matrix v) {
    require_finite(a, "UpdateProblem: a");
    require_square(a, "UpdateProblem: a");
    Matrix a_inv = invert(a);
    return create(std::move(a), std::move(u), std::move(v), std::move(a_inv));
  }

  /// Use a precomputed inverse of `a` (e.g. from known factors). The inverse
  /// is checked: ||a a_inv - I||_2 <= 1e-10 kappa(a).
  static std::shared_ptr<const UpdateProblem> create(Matrix a, Matrix u,
                                                     Matrix v, Matrix a_inv) {
    require_finite(a, "UpdateProblem: a");
    require_finite(u, "UpdateProblem: u");
    require_finite(v, "UpdateProblem: v");
    require_finite(a_inv, "UpdateProblem: a_inv");
    require_square(a, "UpdateProblem: a");
    detail::check_update_shapes(a_inv, u, v, "UpdateProblem");
    if (u.cols() > u.rows())
      throw DimensionError("UpdateProblem: k must not exceed n");
    return std::shared_ptr<const UpdateProblem>(new UpdateProblem(
        std::move(a), std::move(u), std::move(v), std::move(a_inv)));
  }

  Index n() const noexcept { return a_.rows(); }
  Index k() const noexcept { return u_.cols(); }

  const Matrix& a() const noexcept { return a_; }
  const Matrix& u() const noexcept { return u_; }
  const Matrix& v() const noexcept { return v_; }
  const Matrix& a_inv() const noexcept { return a_inv_; }
  /// A + U V^T.
  const Matrix& b() const noexcept { return b_; }
  /// Reference B^{-1}: the exact update applied to a_inv(), so forward errors
  /// are measured against the same A^{-1} that the perturbations act on.
  const Matrix& b_inv() const noexcept { return b_inv_; }
  /// Clean capacitance I + V^T A^{-1} U.
  const Matrix& capacitance() const noexcept { return capacitance_; }

  double norm_a() const noexcept { return norm_a_; }
  double sigma_min_a() const noexcept { return sigma_min_a_; }
  double norm_a_inv() const noexcept { return 1.0 / sigma_min_a_; }
  double kappa_a() const noexcept { return norm_a_ / sigma_min_a_; }
  double norm_u() const noexcept { return norm_u_; }
  double norm_v() const noexcept { return norm_v_; }
  /// ||U||_2 ||V||_2.
  double lambda() const noexcept { return norm_u_ * norm_v_; }
  /// ||C^{-1}||_2.
  double alpha() const noexcept { return alpha_; }
  /// ||C||_2.
  double beta() const noexcept { return beta_; }
  bool u_full_rank() const noexcept { return u_full_rank_; }
  bool v_full_rank() const noexcept { return v_full_rank_; }

 private:
  UpdateProblem(Matrix a, Matrix u, Matrix v, Matrix a_inv)
      : a_(std::move(a)),
        u_(std::move(u)),
        v_(std::move(v)),
        a_inv_(std::move(a_inv)) {
    const Vector sa = singular_values(a_);
    norm_a_ = sa(0);
    sigma_min_a_ = sa(sa.size() - 1);
    if (!(sigma_min_a_ > rank_tolerance(sa, n(), n())))
      throw SingularMatrixError("UpdateProblem: a is singular", sigma_min_a_,
                                rank_tolerance(sa, n(), n()));
    const double residual =
        two_norm(a_ * a_inv_ - Matrix::Identity(n(), n()));
    if (!(residual <= 1e-10 * (norm_a_ / sigma_min_a_)))
      throw NumericalError("UpdateProblem: ||a a_inv - I||_2 = " +
                           std::to_string(residual) +
                           " exceeds 1e-10 kappa(a)");
    norm_u_ = two_norm(u_);
    norm_v_ = two_norm(v_);
    u_full_rank_ = detail::full_column_rank(u_);
    v_full_rank_ = detail::full_column_rank(v_);
    b_ = a_ + u_ * v_.transpose();
    capacitance_ = smw::capacitance(a_inv_, u_, v_);
    const Vector sc = singular_values(capacitance_);
    beta_ = sc(0);
    alpha_ = 1.0 / sc(sc.size() - 1);
    b_inv_ = smw_inverse_exact(a_inv_, u_, v_);
  }

  Matrix a_, u_, v_, a_inv_, b_, b_inv_, capacitance_;
  double norm_a_ = 0.0, sigma_min_a_ = 0.0;
  double norm_u_ = 0.0, norm_v_ = 0.0;
  double alpha_ = 0.0, beta_ = 0.0;
  bool u_full_rank_ = false, v_full_rank_ = false;
};

using ProblemPtr = std::shared_ptr<const UpdateProblem>;

/// One trial: an update problem plus the approximate inverses A~^{-1} and
/// Z^{-1} fed to the update formula.
class ProblemInstance {
 public:
  ProblemInstance(ProblemPtr problem, Matrix a_inv_approx, Matrix z_inv)
      : problem_(std::move(problem)),
        a_inv_approx_(std::move(a_inv_approx)),
        z_inv_(std::move(z_inv)) {
    if (!problem_) throw InvalidInputError("ProblemInstance: null problem");
    if (a_inv_approx_.rows() != problem_->n() ||
        a_inv_approx_.cols() != problem_->n() ||
        z_inv_.rows() != problem_->k() || z_inv_.cols() != problem_->k())
      throw DimensionError("ProblemInstance: approximate inverses do not "
                           "match the problem dimensions");
  }

  const UpdateProblem& problem() const noexcept { return *problem_; }
  const ProblemPtr& problem_ptr() const noexcept { return problem_; }

  const Matrix& a() const noexcept { return problem_->a(); }
  const Matrix& u() const noexcept { return problem_->u(); }
  const Matrix& v() const noexcept { return problem_->v(); }
  const Matrix& a_inv_exact() const noexcept { return problem_->a_inv(); }
  const Matrix& a_inv_approx() const noexcept { return a_inv_approx_; }
  const Matrix& z_inv() const noexcept { return z_inv_; }
  double lambda() const noexcept { return problem_->lambda(); }

 private:
  ProblemPtr problem_;
  Matrix a_inv_approx_;
  Matrix z_inv_;
};

inline Matrix smw_inverse_approx(const ProblemInstance& inst) {
  return smw_inverse_approx(inst.a_inv_approx(), inst.u(), inst.v(),
                            inst.z_inv());
}

/// ||B~^{-1} - B^{-1}||_2 for a precomputed B~^{-1}.
inline double forward_error(const ProblemInstance& inst,
                            const Matrix& b_inv_approx) {
  return two_norm(b_inv_approx - inst.problem().b_inv());
}

inline double forward_error(const ProblemInstance& inst) {
  return forward_error(inst, smw_inverse_approx(inst));
}

/// ||(B~^{-1})^{-1} - B||_2. Throws SingularMatrixError when B~^{-1} is
/// singular within tolerance.
inline double backward_error(const ProblemInstance& inst,
                             const Matrix& b_inv_approx) {
  return two_norm(invert(b_inv_approx) - inst.problem().b());
}

inline double backward_error(const ProblemInstance& inst) {
  return backward_error(inst, smw_inverse_approx(inst));
}

/// Residuals of the two capacitance identities
///   I + V^T A^{-1} U       = V^T A^{-1} B (V^T)^+
///   (I + V^T A^{-1} U)^{-1} = V^T B^{-1} A (V^T)^+
/// together with the scale of each left-hand side and the residual of
/// multiplying the two computed sides, ||C (V^T B^{-1} A (V^T)^+) - I||_2.
struct Lemma2Residuals {
  double identity1 = 0.0;
  double identity2 = 0.0;
  double scale1 = 0.0;
  double scale2 = 0.0;
  double composition = 0.0;

  double relative1() const { return identity1 / scale1; }
  double relative2() const { return identity2 / scale2; }
};

inline Lemma2Residuals lemma2_identity_residuals(const Matrix& a,
                                                 const Matrix& u,
                                                 const Matrix& v) {
  require_finite(a, "lemma2_identity_residuals: a");
  require_square(a, "lemma2_identity_residuals: a");
  detail::check_update_shapes(a, u, v, "lemma2_identity_residuals");
  if (!detail::full_column_rank(u) || !detail::full_column_rank(v))
    throw InvalidInputError(
        "lemma2_identity_residuals: u and v must have full column rank");
  const Matrix a_inv = invert(a);
  const Matrix b = a + u * v.transpose();
  const Matrix b_inv = invert(b);
  const Matrix vt_pinv = pseudo_inverse(v.transpose());
  const Matrix c = capacitance(a_inv, u, v);
  const Matrix c_inv = invert(c);
  const Index k = u.cols();

  const Matrix rhs1 = (v.transpose() * a_inv) * b * vt_pinv;
  const Matrix rhs2 = (v.transpose() * b_inv) * a * vt_pinv;

  Lemma2Residuals r;
  r.identity1 = two_norm(c - rhs1);
  r.identity2 = two_norm(c_inv - rhs2);
  r.scale1 = two_norm(c);
  r.scale2 = two_norm(c_inv);
  r.composition = two_norm(c * rhs2 - Matrix::Identity(k, k));
  return r;
}

/// invert(b) + E3 with E3 a seeded Gaussian of spectral norm exactly eps3:
/// the direct-inversion baseline.
inline Matrix direct_inverse_perturbed(const Matrix& b, double eps3,
                                       std::uint64_t seed) {
  Matrix b_inv = invert(b);
  if (eps3 == 0.0) return b_inv;
  return b_inv + gaussian_with_norm(b.rows(), b.cols(), eps3, seed);
}

}  // namespace smw
