#pragma once

// Forward and backward error bounds for the approximate SMW update, their
// simplified forms, the inverse-perturbation lemma, the improved two-norm
// backward bound under perturbation of A itself, and Yip's capacitance
// condition-number diagnostics.
//
// Assumption violations never throw. Every evaluator returns a value together
// with one flag and one margin (threshold - actual) per hypothesis, because the
// experiments deliberately sweep past the thresholds.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "smw/linalg.hpp"
#include "smw/perturbation.hpp"
#include "smw/woodbury.hpp"

namespace smw {

inline constexpr double infinity = std::numeric_limits<double>::infinity();

struct NamedValue {
  std::string name;
  double value = 0.0;
};

struct AssumptionCheck {
  std::string name;
  bool ok = false;
  double margin = 0.0;
};

struct BoundReport {
  double value = 0.0;
  std::vector<NamedValue> terms;
  std::vector<AssumptionCheck> assumptions;
  /// Quantities that are informative but not summands of `value`.
  std::vector<NamedValue> details;

  bool assumptions_hold() const {
    return std::all_of(assumptions.begin(), assumptions.end(),
                       [](const AssumptionCheck& a) { return a.ok; });
  }

  double ok_fraction() const {
    if (assumptions.empty()) return 1.0;
    const auto ok = std::count_if(assumptions.begin(), assumptions.end(),
                                  [](const AssumptionCheck& a) { return a.ok; });
    return static_cast<double>(ok) / static_cast<double>(assumptions.size());
  }

  std::optional<double> term(const std::string& name) const {
    return find(terms, name);
  }
  std::optional<double> detail(const std::string& name) const {
    return find(details, name);
  }
  const AssumptionCheck* assumption(const std::string& name) const {
    for (const auto& a : assumptions)
      if (a.name == name) return &a;
    return nullptr;
  }

 private:
  static std::optional<double> find(const std::vector<NamedValue>& v,
                                    const std::string& name) {
    for (const auto& x : v)
      if (x.name == name) return x.value;
    return std::nullopt;
  }
};

/// Every scalar the forward/backward theorems consume. alpha and beta come
/// from the clean capacitance I + V^T A^{-1} U.
struct BoundInputs {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double lambda = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
  double norm_a = 1.0;
  double norm_a_inv = 1.0;
  double kappa_v = 1.0;
  double norm_binv_a = 1.0;
  double norm_ainv_b = 1.0;

  // Invertibility of A~ and of (Z^{-1})^{-1} - V^T A~^{-1} U. The theorem
  // gives no tolerance; callers that measured these pass the margin
  // sigma_min - rank tolerance. Infinity means "assumed".
  double a_tilde_invertibility_margin = infinity;
  double reduced_capacitance_invertibility_margin = infinity;

  double sigma_min_a() const { return 1.0 / norm_a_inv; }
};

namespace detail {

inline void require_finite_inputs(const BoundInputs& in, const char* what) {
  const double xs[] = {in.eps1,  in.eps2,       in.lambda,     in.alpha,
                       in.beta,  in.norm_a,     in.norm_a_inv, in.kappa_v,
                       in.norm_binv_a, in.norm_ainv_b};
  for (double x : xs)
    if (!std::isfinite(x) || x < 0.0)
      throw InvalidInputError(std::string(what) +
                              ": bound inputs must be finite and >= 0");
}

inline AssumptionCheck less_than(std::string name, double actual,
                                 double threshold) {
  return {std::move(name), actual < threshold, threshold - actual};
}

inline AssumptionCheck at_most(std::string name, double actual,
                               double threshold) {
  return {std::move(name), actual <= threshold, threshold - actual};
}

inline double safe_reciprocal(double x) {
  return x > 0.0 ? 1.0 / x : infinity;
}

inline double forward_threshold(double lambda, double alpha) {
  return safe_reciprocal(2.0 * lambda * alpha);
}

inline BoundReport forward_with_alpha(const BoundInputs& in, double alpha) {
  const double e1 = in.eps1, e2 = in.eps2, lam = in.lambda;
  const double na = in.norm_a_inv;
  const double nt = na + e1;  // cap on ||A~^{-1}||
  const double t1 = nt * nt * lam * e2;
  const double t2 = 2.0 * nt * nt * alpha * alpha * lam * lam * e1;
  const double t3 = nt * lam * alpha * e1;
  const double t4 = na * lam * alpha * e1;

  BoundReport r;
  r.terms = {{"inverse_error", e1},
             {"alpha_term", t3 + t4},
             {"capacitance_term", t1 + t2}};
  r.value = r.terms[0].value + r.terms[1].value + r.terms[2].value;
  r.details = {{"T1", t1}, {"T2", t2}, {"T3", t3}, {"T4", t4},
               {"alpha_used", alpha}};
  r.assumptions = {less_than("eps1 < 1/(2 lambda alpha)", e1,
                             forward_threshold(lam, alpha))};
  return r;
}

inline std::vector<AssumptionCheck> backward_assumptions(const BoundInputs& in,
                                                         double beta) {
  const double e1 = in.eps1, e2 = in.eps2;
  const double cap = beta + in.lambda * e1;
  return {
      less_than("eps1 < 1/(2 ||A||)", e1, safe_reciprocal(2.0 * in.norm_a)),
      less_than("eps2 < 1/(2 (beta + lambda eps1))", e2,
                safe_reciprocal(2.0 * cap)),
      less_than("2 (beta + lambda eps1)^2 eps2 < 1/2",
                2.0 * cap * cap * e2, 0.5),
      {"A~ invertible", in.a_tilde_invertibility_margin > 0.0,
       in.a_tilde_invertibility_margin},
      {"(Z^{-1})^{-1} - V^T A~^{-1} U invertible",
       in.reduced_capacitance_invertibility_margin > 0.0,
       in.reduced_capacitance_invertibility_margin},
  };
}

inline BoundReport backward_with_beta(const BoundInputs& in, double beta) {
  const double cap = beta + in.lambda * in.eps1;
  BoundReport r;
  r.terms = {{"S1", 2.0 * in.eps1 * in.norm_a * in.norm_a},
             {"S2", 4.0 * in.lambda * in.eps2 * cap * cap}};
  r.value = r.terms[0].value + r.terms[1].value;
  r.details = {{"perturbed_capacitance_cap", cap}, {"beta_used", beta}};
  r.assumptions = backward_assumptions(in, beta);
  return r;
}

inline AssumptionCheck equal_eps(const BoundInputs& in) {
  return {"eps1 = eps2", in.eps1 == in.eps2, -std::abs(in.eps1 - in.eps2)};
}

inline std::vector<AssumptionCheck> unit_caps(const BoundInputs& in,
                                              bool include_eps2) {
  std::vector<AssumptionCheck> v{at_most("eps1 <= 1", in.eps1, 1.0)};
  if (include_eps2) v.push_back(at_most("eps2 <= 1", in.eps2, 1.0));
  v.push_back(at_most("sigma_min(A) <= 1", in.sigma_min_a(), 1.0));
  return v;
}

}  // namespace detail

/// Full forward bound with per-term breakdown:
/// eps1 + eps1 lambda alpha (2||A^{-1}|| + eps1)
///      + lambda (||A^{-1}|| + eps1)^2 (eps2 + 2 eps1 lambda alpha^2).
inline BoundReport forward_bound(const BoundInputs& in) {
  detail::require_finite_inputs(in, "forward_bound");
  return detail::forward_with_alpha(in, in.alpha);
}

/// Small-update form 2 eps2 ||A^{-1}|| + 12 eps1.
inline BoundReport forward_bound_simplified(const BoundInputs& in) {
  detail::require_finite_inputs(in, "forward_bound_simplified");
  BoundReport r;
  r.terms = {{"capacitance_term", 2.0 * in.eps2 * in.norm_a_inv},
             {"inverse_term", 12.0 * in.eps1}};
  r.value = r.terms[0].value + r.terms[1].value;
  r.assumptions = detail::unit_caps(in, true);
  r.assumptions.push_back(detail::at_most("lambda <= sigma_min(A)/2", in.lambda,
                                          0.5 * in.sigma_min_a()));
  r.assumptions.push_back(detail::less_than(
      "eps1 < 1/(2 lambda alpha)", in.eps1,
      detail::forward_threshold(in.lambda, in.alpha)));
  return r;
}

/// Large-alpha form 16 eps lambda^2 ||A^{-1}||^2 alpha^2, eps = max(eps1, eps2).
inline BoundReport forward_bound_alpha_large(const BoundInputs& in) {
  detail::require_finite_inputs(in, "forward_bound_alpha_large");
  const double eps = std::max(in.eps1, in.eps2);
  BoundReport r;
  r.terms = {{"dominant_term", 16.0 * eps * in.lambda * in.lambda *
                                   in.norm_a_inv * in.norm_a_inv * in.alpha *
                                   in.alpha}};
  r.value = r.terms[0].value;
  r.assumptions = {detail::equal_eps(in)};
  for (auto& a : detail::unit_caps(in, false)) r.assumptions.push_back(a);
  r.assumptions.push_back(detail::less_than(
      "eps1 < 1/(2 lambda alpha)", in.eps1,
      detail::forward_threshold(in.lambda, in.alpha)));
  r.assumptions.push_back(
      detail::at_most("max(1/lambda, 1) <= alpha",
                      std::max(detail::safe_reciprocal(in.lambda), 1.0),
                      in.alpha));
  return r;
}

/// Full forward bound with alpha replaced by kappa(V) ||B^{-1} A||.
inline BoundReport forward_bound_kappa_v(const BoundInputs& in) {
  detail::require_finite_inputs(in, "forward_bound_kappa_v");
  return detail::forward_with_alpha(in, in.kappa_v * in.norm_binv_a);
}

/// Full backward bound 2 eps1 ||A||^2 + 4 lambda eps2 (beta + lambda eps1)^2.
inline BoundReport backward_bound(const BoundInputs& in) {
  detail::require_finite_inputs(in, "backward_bound");
  return detail::backward_with_beta(in, in.beta);
}

/// Small-update form 2 eps1 ||A||^2 + 8 eps2.
inline BoundReport backward_bound_simplified(const BoundInputs& in) {
  detail::require_finite_inputs(in, "backward_bound_simplified");
  BoundReport r;
  r.terms = {{"S1", 2.0 * in.eps1 * in.norm_a * in.norm_a},
             {"S2", 8.0 * in.eps2}};
  r.value = r.terms[0].value + r.terms[1].value;
  r.assumptions = detail::unit_caps(in, true);
  r.assumptions.push_back(detail::at_most("lambda <= sigma_min(A)/2", in.lambda,
                                          0.5 * in.sigma_min_a()));
  for (auto& a : detail::backward_assumptions(in, in.beta))
    r.assumptions.push_back(a);
  return r;
}

/// Large-beta form 18 lambda eps beta^2, eps = max(eps1, eps2).
inline BoundReport backward_bound_beta_large(const BoundInputs& in) {
  detail::require_finite_inputs(in, "backward_bound_beta_large");
  const double eps = std::max(in.eps1, in.eps2);
  BoundReport r;
  r.terms = {{"dominant_term", 18.0 * in.lambda * eps * in.beta * in.beta}};
  r.value = r.terms[0].value;
  r.assumptions = {detail::equal_eps(in)};
  for (auto& a : detail::unit_caps(in, false)) r.assumptions.push_back(a);
  for (auto& a : detail::backward_assumptions(in, in.beta))
    r.assumptions.push_back(a);
  const double needed =
      std::max({in.lambda,
                in.lambda > 0.0 ? in.norm_a / std::sqrt(in.lambda) : infinity,
                1.0});
  r.assumptions.push_back(
      detail::at_most("max(lambda, ||A||/sqrt(lambda), 1) <= beta", needed,
                      in.beta));
  return r;
}

/// Full backward bound with beta replaced by kappa(V) ||A^{-1} B||.
inline BoundReport backward_bound_kappa_v(const BoundInputs& in) {
  detail::require_finite_inputs(in, "backward_bound_kappa_v");
  return detail::backward_with_beta(in, in.kappa_v * in.norm_ainv_b);
}

// ---------------------------------------------------------------------------
// Measurement

enum class MeasureScope {
  /// alpha, beta, lambda, ||A||, ||A^{-1}||.
  core,
  /// core plus kappa(V), ||B^{-1} A||, ||A^{-1} B||.
  full,
};

inline BoundInputs measure_inputs(const UpdateProblem& p, double eps1,
                                  double eps2,
                                  MeasureScope scope = MeasureScope::full) {
  BoundInputs in;
  in.eps1 = eps1;
  in.eps2 = eps2;
  in.lambda = p.lambda();
  in.alpha = p.alpha();
  in.beta = p.beta();
  in.norm_a = p.norm_a();
  in.norm_a_inv = p.norm_a_inv();
  if (scope == MeasureScope::full) {
    in.kappa_v = p.v_full_rank() ? condition_number(p.v()) : infinity;
    in.norm_binv_a = two_norm(p.b_inv() * p.a());
    in.norm_ainv_b = two_norm(p.a_inv() * p.b());
  }
  return in;
}

/// Measures from raw matrices. A singular capacitance yields alpha = +inf
/// (and infinite B-dependent norms); the evaluators then refuse.
inline BoundInputs measure_inputs(const Matrix& a, const Matrix& u,
                                  const Matrix& v,
                                  const PerturbationSpec& spec) {
  spec.validate();
  require_finite(a, "measure_inputs: a");
  require_square(a, "measure_inputs: a");
  const Matrix a_inv = invert(a);
  const Matrix c = capacitance(a_inv, u, v);
  const Vector sc = singular_values(c);
  const Vector sa = singular_values(a);

  BoundInputs in;
  in.eps1 = spec.eps1;
  in.eps2 = spec.eps2;
  in.lambda = two_norm(u) * two_norm(v);
  in.beta = sc(0);
  const double c_min = sc(sc.size() - 1);
  const bool c_regular = c_min > rank_tolerance(sc, c.rows(), c.cols());
  in.alpha = c_regular ? 1.0 / c_min : infinity;
  in.norm_a = sa(0);
  in.norm_a_inv = 1.0 / sa(sa.size() - 1);
  in.kappa_v = detail::full_column_rank(v) ? condition_number(v) : infinity;
  const Matrix b = a + u * v.transpose();
  in.norm_ainv_b = two_norm(a_inv * b);
  if (c_regular) {
    in.norm_binv_a = two_norm(smw_inverse_exact(a_inv, u, v) * a);
  } else {
    in.norm_binv_a = infinity;
  }
  return in;
}

// ---------------------------------------------------------------------------
// Assumption thresholds (each inequality solved at equality)

/// Largest eps1 with eps1 < 1/(2 lambda alpha).
inline double forward_eps_threshold(double lambda, double alpha) {
  return detail::forward_threshold(lambda, alpha);
}

/// Largest alpha with eps1 < 1/(2 lambda alpha).
inline double forward_alpha_threshold(double lambda, double eps1) {
  return detail::safe_reciprocal(2.0 * lambda * eps1);
}

/// eps1 < 1/(2 ||A||).
inline double backward_eps1_threshold(double norm_a) {
  return detail::safe_reciprocal(2.0 * norm_a);
}

/// Common eps = eps1 = eps2 solving eps (beta + lambda eps) = 1/2.
inline double backward_eps2_threshold(double beta, double lambda) {
  return 1.0 / (beta + std::sqrt(beta * beta + 2.0 * lambda));
}

/// Common eps solving 2 (beta + lambda eps)^2 eps = 1/2 (monotone, bisection).
inline double backward_product_threshold(double beta, double lambda) {
  auto f = [&](double e) {
    const double c = beta + lambda * e;
    return 2.0 * c * c * e - 0.5;
  };
  double lo = 0.0;
  double hi = beta > 0.0 ? 1.0 / (4.0 * beta * beta) : 1.0;
  while (f(hi) < 0.0) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return lo;
}

/// Largest beta with eps2 < 1/(2 (beta + lambda eps1)).
inline double backward_beta_threshold_eps2(double eps1, double eps2,
                                           double lambda) {
  return 1.0 / (2.0 * eps2) - lambda * eps1;
}

/// Largest beta with 2 (beta + lambda eps1)^2 eps2 < 1/2.
inline double backward_beta_threshold_product(double eps1, double eps2,
                                              double lambda) {
  return 1.0 / (2.0 * std::sqrt(eps2)) - lambda * eps1;
}

// ---------------------------------------------------------------------------
// Inverse-perturbation lemma

struct Lemma1Bound {
  /// 2 rho^2 eps: cap on ||M^{-1} - N^{-1}||.
  double difference = 0.0;
  /// 2 rho: cap on ||M^{-1}||.
  double inverse_norm = 0.0;
  std::vector<AssumptionCheck> assumptions;

  bool admissible() const {
    return std::all_of(assumptions.begin(), assumptions.end(),
                       [](const AssumptionCheck& a) { return a.ok; });
  }
};

/// For ||N^{-1}|| <= rho and ||M - N|| <= eps <= 1/(2 rho). The boundary
/// eps = 1/(2 rho) is admissible.
inline Lemma1Bound lemma1_bound(double rho, double eps) {
  if (!std::isfinite(rho) || !std::isfinite(eps) || rho < 0.0 || eps < 0.0)
    throw InvalidInputError("lemma1_bound: rho and eps must be finite, >= 0");
  Lemma1Bound b;
  b.difference = 2.0 * rho * rho * eps;
  b.inverse_norm = 2.0 * rho;
  b.assumptions = {{"rho > 1", rho > 1.0, rho - 1.0},
                   detail::at_most("eps <= 1/(2 rho)", eps,
                                   detail::safe_reciprocal(2.0 * rho))};
  return b;
}

// ---------------------------------------------------------------------------
// Improved two-norm backward bound when A itself is perturbed

struct GhadiriBoundInputs {
  double rho = 1.0;
  double gamma = 0.0;
  /// ||A~ - A||_2.
  double eps1 = 0.0;
  /// ||Z^{-1} - (I + V^T A~^{-1} U)^{-1}||_2.
  double eps2 = 0.0;
};

/// rho = max(1, ||A||, ||A^{-1}||, ||U||, ||V||, ||B||, ||B^{-1}||),
/// gamma = max(||U||, ||V||).
inline GhadiriBoundInputs measure_ghadiri_inputs(const Matrix& a,
                                                 const Matrix& u,
                                                 const Matrix& v, double eps1,
                                                 double eps2) {
  const Matrix b = a + u * v.transpose();
  const double nu = two_norm(u), nv = two_norm(v);
  GhadiriBoundInputs in;
  in.gamma = std::max(nu, nv);
  in.rho = std::max({1.0, two_norm(a), 1.0 / sigma_min(a), nu, nv,
                     two_norm(b), 1.0 / sigma_min(b)});
  in.eps1 = eps1;
  in.eps2 = eps2;
  return in;
}

/// 512 eps2 rho^14 + eps1, with the proof's intermediate quantity
/// 8 (1+gamma)^4 rho^4 (gamma^2 rho + 1)^2 eps2 exposed as a detail.
inline BoundReport ghadiri_two_norm_bound(const GhadiriBoundInputs& in) {
  const double xs[] = {in.rho, in.gamma, in.eps1, in.eps2};
  for (double x : xs)
    if (!std::isfinite(x) || x < 0.0)
      throw InvalidInputError("ghadiri_two_norm_bound: inputs must be finite "
                              "and >= 0");
  const double rho = in.rho, g = in.gamma;
  const double rho3 = rho * rho * rho;
  const double rho7 = rho3 * rho3 * rho;
  const double rho14 = rho7 * rho7;
  const double g1 = (1.0 + g) * (1.0 + g);
  const double gr = g * g * rho + 1.0;

  BoundReport r;
  r.terms = {{"capacitance_term", 512.0 * in.eps2 * rho14},
             {"matrix_term", in.eps1}};
  r.value = r.terms[0].value + r.terms[1].value;
  r.details = {{"intermediate",
                8.0 * g1 * g1 * rho * rho * rho * rho * gr * gr * in.eps2}};
  const double sharp =
      rho3 / (8.0 * std::pow(1.0 + rho, 4) * (rho3 + 1.0) * (rho3 + 1.0));
  r.assumptions = {
      {"rho >= 1", rho >= 1.0, rho - 1.0},
      detail::less_than("eps1 < 1", in.eps1, 1.0),
      detail::at_most("eps2 <= 1/(512 rho^7)", in.eps2, 1.0 / (512.0 * rho7)),
      detail::at_most("eps2 <= rho^3/(8 (1+rho)^4 (rho^3+1)^2)", in.eps2,
                      sharp),
      detail::at_most("gamma <= rho", g, rho),
  };
  return r;
}

// ---------------------------------------------------------------------------
// Capacitance conditioning diagnostics (Yip)
//
// Stated in the literature for I - V^T A^{-1} U; here the capacitance is
// I + V^T A^{-1} U. Condition numbers are invariant under U -> -U, so the
// inequalities carry over unchanged.

namespace detail {

/// True when exactly n - k of the lines (rows if by_rows, else columns) of m
/// vanish and the remaining k are linearly independent.
inline std::pair<bool, double> has_k_active_lines(const Matrix& m, Index k,
                                                  bool by_rows) {
  const Matrix w = by_rows ? m : Matrix(m.transpose());
  const double scale = w.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) return {false, -1.0};
  const double tol = scale * static_cast<double>(w.cols()) * machine_epsilon;
  std::vector<Index> active;
  for (Index i = 0; i < w.rows(); ++i)
    if (w.row(i).cwiseAbs().maxCoeff() > tol) active.push_back(i);
  const auto count = static_cast<Index>(active.size());
  if (count != k) return {false, -static_cast<double>(std::abs(count - k))};
  Matrix block(k, w.cols());
  for (Index i = 0; i < k; ++i) block.row(i) = w.row(active[i]);
  const Vector s = singular_values(block);
  const double margin = s(s.size() - 1) - rank_tolerance(s, k, w.cols());
  return {margin > 0.0, margin};
}

}  // namespace detail

/// value = kappa(I + V^T A^{-1} U). Details carry the general bound
/// min(kappa^2(U), kappa^2(V^T)) kappa(A) kappa(B) and the structured bound
/// kappa(A) kappa(B); the single assumption records whether U V^T has the
/// structure that licenses the structured bound.
inline BoundReport yip_capacitance_diagnostics(const Matrix& a, const Matrix& u,
                                               const Matrix& v) {
  require_finite(a, "yip_capacitance_diagnostics: a");
  require_square(a, "yip_capacitance_diagnostics: a");
  detail::check_update_shapes(a, u, v, "yip_capacitance_diagnostics");
  const Matrix b = a + u * v.transpose();
  const Matrix a_inv = invert(a);
  invert(b);  // B must be invertible
  const double kc = condition_number(capacitance(a_inv, u, v));
  const double ka = condition_number(a), kb = condition_number(b);
  const double ku = condition_number(u), kv = condition_number(v);
  const double general = std::min(ku * ku, kv * kv) * ka * kb;
  const double structured = ka * kb;

  const Matrix uvt = u * v.transpose();
  const auto rows = detail::has_k_active_lines(uvt, u.cols(), true);
  const auto cols = detail::has_k_active_lines(uvt, u.cols(), false);

  BoundReport r;
  r.value = kc;
  r.details = {{"kappa_capacitance", kc}, {"general_bound", general},
               {"structured_bound", structured}, {"kappa_a", ka},
               {"kappa_b", kb}, {"kappa_u", ku}, {"kappa_v", kv}};
  r.assumptions = {
      {"U V^T has exactly n-k zero rows or columns", rows.first || cols.first,
       std::max(rows.second, cols.second)},
  };
  return r;
}

}  // namespace smw
