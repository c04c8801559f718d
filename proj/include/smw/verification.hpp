#pragma once

// Property suites behind `smw verify`. Each check tallies how many instances
// it examined, how many violated the property, and the worst relative slack
// (limit - value) / limit seen, so a negative margin is a violation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "smw/bounds.hpp"
#include "smw/constructions.hpp"
#include "smw/experiments.hpp"
#include "smw/linalg.hpp"
#include "smw/noise.hpp"
#include "smw/perturbation.hpp"
#include "smw/random.hpp"
#include "smw/woodbury.hpp"

namespace smw {

struct CheckResult {
  std::string name;
  int checked = 0;
  int failed = 0;
  /// Instances drawn but not examined because a hypothesis did not hold.
  int skipped = 0;
  /// Least number of examined instances for the check to count as passed.
  int minimum = 1;
  double worst_margin = infinity;
  std::string note;

  bool passed() const { return failed == 0 && checked >= minimum; }

  /// Property value <= limit. NaN fails.
  void record(double value, double limit) {
    const bool ok = value <= limit;
    double margin;
    if (limit > 0.0 && std::isfinite(limit))
      margin = (limit - value) / limit;
    else
      margin = ok ? 0.0 : -infinity;
    if (std::isnan(margin)) margin = -infinity;
    record_flag(ok, margin);
  }

  void record_flag(bool ok, double margin) {
    ++checked;
    if (!ok) ++failed;
    worst_margin = std::min(worst_margin, margin);
  }

  void skip() { ++skipped; }

  void merge(const CheckResult& o) {
    checked += o.checked;
    failed += o.failed;
    skipped += o.skipped;
    worst_margin = std::min(worst_margin, o.worst_margin);
  }
};

struct SuiteReport {
  std::string name;
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const CheckResult& c) { return c.passed(); });
  }

  const CheckResult* find(const std::string& check) const {
    for (const auto& c : checks)
      if (c.name == check) return &c;
    return nullptr;
  }
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  int smw_instances = 100;
  int lemma2_instances = 100;
  /// Assumption-satisfying instances required by each validity check.
  int bound_instances = 1000;
  int lemma1_pairs = 1000;
  int improved_instances = 50;
};

namespace check {
// Stable check names; the acceptance harness looks these up.
inline constexpr const char* smw_exact = "smw exact vs direct inverse";
inline constexpr const char* zero_noise = "zero-noise approximate = exact";
inline constexpr const char* identity_residuals = "inverse identities, gaussian";
inline constexpr const char* identity_residuals_diag =
    "inverse identities, ill-conditioned diagonal";
inline constexpr const char* identity_composition = "identity composition";
inline constexpr const char* direct_baseline = "direct baseline noise norm";

inline constexpr const char* forward_validity = "forward bound validity";
inline constexpr const char* backward_validity = "backward bound validity";
inline constexpr const char* forward_simplified = "forward small-update corollary";
inline constexpr const char* forward_alpha_large = "forward alpha-large corollary";
inline constexpr const char* forward_kappa_v = "forward kappa(V) corollary";
inline constexpr const char* backward_simplified = "backward small-update corollary";
inline constexpr const char* backward_beta_large = "backward beta-large corollary";
inline constexpr const char* backward_kappa_v = "backward kappa(V) corollary";
inline constexpr const char* kappa_v_ordering = "bound <= kappa(V) variant";
inline constexpr const char* term_sum = "value = sum of terms";
inline constexpr const char* monotonicity = "monotone in eps1 and eps2";
inline constexpr const char* improved_validity = "improved two-norm bound validity";
inline constexpr const char* yip_general = "capacitance conditioning, general";
inline constexpr const char* yip_structured = "capacitance conditioning, structured";

inline constexpr const char* lemma1_validity = "inverse difference <= 2 rho^2 eps";
inline constexpr const char* lemma1_inverse_cap = "||M^{-1}|| <= 2 rho";
inline constexpr const char* lemma1_scalar = "scalar tightness ratio = 1";
inline constexpr const char* lemma1_rank_one = "rank-one tightness ratio = 1/3";
inline constexpr const char* lemma1_zero = "eps = 0 gives 0";

inline constexpr const char* forward_alpha_fidelity = "forward alpha fidelity";
inline constexpr const char* forward_norms = "forward ||U|| = 1, ||V|| = max|s|";
inline constexpr const char* backward_capacitance = "backward capacitance = I + S";
inline constexpr const char* backward_beta = "backward beta = ||I + S||";
inline constexpr const char* construction_determinism = "constructions deterministic";
inline constexpr const char* offsets = "offset grid";
}  // namespace check

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline CheckResult make_check(const char* name, int minimum = 1) {
  CheckResult c;
  c.name = name;
  c.minimum = minimum;
  return c;
}

/// 10^(lo + (hi - lo) u), u uniform in [0, 1).
inline double log_uniform(NormalRng& rng, double lo, double hi) {
  return std::pow(10.0, lo + (hi - lo) * rng.uniform());
}

inline std::string format_fixed(const char* fmt, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

/// Gaussian A, U, V with n <= 50, k <= 5 and kappa(B) <= 1e6, redrawn until
/// the conditioning holds.
inline ProblemPtr small_gaussian_problem(std::uint64_t seed, int index) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t s = mix_seed(seed + (static_cast<std::uint64_t>(index) << 20) + attempt);
    NormalRng rng(s);
    const Index n = 5 + static_cast<Index>(rng.uniform() * 46.0);
    const Index k = 1 + static_cast<Index>(rng.uniform() * std::min<double>(5.0, n));
    const double scale = log_uniform(rng, -1.0, 1.0);
    Matrix a = gaussian_matrix(n, n, s ^ stream::matrix_a);
    Matrix u = gaussian_matrix(n, k, s ^ stream::update_u) * scale;
    Matrix v = gaussian_matrix(n, k, s ^ stream::update_v);
    const Matrix b = a + u * v.transpose();
    if (condition_number(b) > 1e6 || condition_number(a) > 1e6) continue;
    return UpdateProblem::create(std::move(a), std::move(u), std::move(v));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Identities

inline SuiteReport verify_identities(const VerifyOptions& opt = {}) {
  detail::Stopwatch clock;
  auto exact = detail::make_check(check::smw_exact, opt.smw_instances);
  auto zero = detail::make_check(check::zero_noise, opt.smw_instances);
  for (int i = 0; i < opt.smw_instances; ++i) {
    const ProblemPtr p = detail::small_gaussian_problem(opt.seed, i);
    const Matrix direct = invert(p->b());
    const double scale = two_norm(direct);
    exact.record(two_norm(p->b_inv() - direct), 1e-9 * scale);
    const Matrix approx = smw_inverse_approx(
        p->a_inv(), p->u(), p->v(), invert(p->capacitance()));
    zero.record(two_norm(approx - p->b_inv()), 1e-12 * scale);
  }

  // Gaussian family plus a diagonal family with kappa(A) = 1e6.
  const int diag_count = std::max(1, opt.lemma2_instances / 10);
  const int gauss_count = opt.lemma2_instances - diag_count;
  auto residuals = detail::make_check(check::identity_residuals, gauss_count);
  auto residuals_diag =
      detail::make_check(check::identity_residuals_diag, diag_count);
  auto composition =
      detail::make_check(check::identity_composition, opt.lemma2_instances);
  for (int i = 0; i < opt.lemma2_instances; ++i) {
    const bool diagonal = i >= gauss_count;
    const std::uint64_t s = mix_seed(opt.seed ^ 0x1D1D000000000000ULL) + i;
    NormalRng rng(s);
    const Index n = 6 + static_cast<Index>(rng.uniform() * 45.0);
    const Index k = 1 + static_cast<Index>(rng.uniform() * 5.0);
    Matrix a = diagonal ? Matrix(logspace(0.0, -6.0, n).asDiagonal())
                        : gaussian_matrix(n, n, s ^ stream::matrix_a);
    const double root = std::sqrt(detail::log_uniform(rng, -2.0, 0.0) *
                                  (diagonal ? 1.0 : sigma_min(a)));
    const Matrix u = gaussian_with_norm(n, k, root, s ^ stream::update_u);
    const Matrix v = gaussian_with_norm(n, k, root, s ^ stream::update_v);
    const Lemma2Residuals r = lemma2_identity_residuals(a, u, v);
    const double tol = diagonal ? 1e-7 : 1e-9;
    auto& target = diagonal ? residuals_diag : residuals;
    target.record(std::max(r.relative1(), r.relative2()), tol);
    composition.record(r.composition, tol);
  }

  auto baseline = detail::make_check(check::direct_baseline, 20);
  for (int i = 0; i < 20; ++i) {
    const ProblemPtr p = detail::small_gaussian_problem(opt.seed ^ 0xBA5EULL, i);
    const double eps3 = std::pow(10.0, -10.0 + 0.4 * i);
    const Matrix e = direct_inverse_perturbed(p->b(), eps3, opt.seed + i) -
                     invert(p->b());
    baseline.record(std::abs(two_norm(e) - eps3), 1e-9 * eps3 + 1e-15 * two_norm(p->b_inv()));
  }

  return {"identities",
          {exact, zero, residuals, residuals_diag, composition, baseline},
          clock.seconds()};
}

// ---------------------------------------------------------------------------
// Bounds

namespace detail {

enum BoundCheck {
  fwd_valid, bwd_valid, fwd_simple, fwd_alpha, fwd_kv, bwd_simple, bwd_beta,
  bwd_kv, kv_order, term_sum_check, monotone, bound_check_count
};

struct BoundTally {
  CheckResult c[bound_check_count];
};

inline void check_terms(CheckResult& c, const BoundReport& r) {
  double sum = 0.0;
  for (const auto& t : r.terms) sum += t.value;
  c.record(std::abs(r.value - sum), 1e-12 * std::max(r.value, 1e-300));
}

/// `draws` seeded perturbations of one problem, judged against every bound.
inline BoundTally bound_validity_task(const ProblemPtr& p, std::uint64_t seed,
                                      int draws) {
  BoundTally t;
  const BoundInputs base = measure_inputs(*p, 0.0, 0.0, MeasureScope::full);
  NormalRng rng(seed ^ 0xE95E000000000000ULL);

  for (int d = 0; d < draws; ++d) {
    const double eps1 = log_uniform(rng, -10.0, -2.0);
    const double other = log_uniform(rng, -10.0, -2.0);
    const double eps2 = d % 2 == 0 ? eps1 : other;
    const std::uint64_t trial = seed + 1 + static_cast<std::uint64_t>(d);

    double fwd_err, bwd_err;
    BoundInputs in = base;
    in.eps1 = eps1;
    in.eps2 = eps2;
    try {
      const ProblemInstance inst = perturb_instance(p, {eps1, eps2, trial});
      const Matrix approx = smw_inverse_approx(inst);
      fwd_err = forward_error(inst, approx);
      bwd_err = two_norm(invert(approx) - p->b());
      // Weyl: sigma_min(A~^{-1}) >= 1/||A|| - eps1.
      in.a_tilde_invertibility_margin = 1.0 / p->norm_a() - eps1;
      const Matrix reduced = invert(inst.z_inv()) -
                             p->v().transpose() * inst.a_inv_approx() * p->u();
      const Vector rs = singular_values(reduced);
      in.reduced_capacitance_invertibility_margin =
          rs(rs.size() - 1) - rank_tolerance(rs, reduced.rows(), reduced.cols());
    } catch (const SingularMatrixError&) {
      for (auto& c : t.c) c.skip();
      continue;
    }

    auto judge = [](CheckResult& c, const BoundReport& r, double err) {
      if (r.assumptions_hold())
        c.record(err, r.value);
      else
        c.skip();
    };
    const BoundReport fwd = forward_bound(in);
    const BoundReport bwd = backward_bound(in);
    const BoundReport fwd_kv_r = forward_bound_kappa_v(in);
    const BoundReport bwd_kv_r = backward_bound_kappa_v(in);
    judge(t.c[fwd_valid], fwd, fwd_err);
    judge(t.c[bwd_valid], bwd, bwd_err);
    judge(t.c[fwd_simple], forward_bound_simplified(in), fwd_err);
    judge(t.c[fwd_alpha], forward_bound_alpha_large(in), fwd_err);
    judge(t.c[fwd_kv], fwd_kv_r, fwd_err);
    judge(t.c[bwd_simple], backward_bound_simplified(in), bwd_err);
    judge(t.c[bwd_beta], backward_bound_beta_large(in), bwd_err);
    judge(t.c[bwd_kv], bwd_kv_r, bwd_err);

    t.c[kv_order].record(fwd.value, fwd_kv_r.value * (1.0 + 1e-12));
    t.c[kv_order].record(bwd.value, bwd_kv_r.value * (1.0 + 1e-12));
    check_terms(t.c[term_sum_check], fwd);
    check_terms(t.c[term_sum_check], bwd);

    BoundInputs up1 = in, up2 = in;
    up1.eps1 *= 2.0;
    up2.eps2 *= 2.0;
    t.c[monotone].record(fwd.value, forward_bound(up1).value);
    t.c[monotone].record(fwd.value, forward_bound(up2).value);
    t.c[monotone].record(bwd.value, backward_bound(up1).value);
    t.c[monotone].record(bwd.value, backward_bound(up2).value);
  }
  return t;
}

inline ProblemPtr gaussian_bound_problem(Index n, Index k, double lambda_factor,
                                         std::uint64_t seed) {
  Matrix a = gaussian_matrix(n, n, seed ^ stream::matrix_a);
  const double lambda = lambda_factor * sigma_min(a);
  auto [u, v] = make_update_pair(n, k, lambda, seed ^ stream::updates);
  return UpdateProblem::create(std::move(a), std::move(u), std::move(v));
}

/// Engineered problems with large alpha or beta, so the large-capacitance
/// corollaries see instances whose hypotheses hold.
inline std::vector<ProblemPtr> large_capacitance_problems(std::uint64_t seed) {
  std::vector<ProblemPtr> out;
  for (double alpha : {1e1, 1e2, 1e3, 1e4})
    for (double lambda : {0.02, 200.0}) {
      auto c = build_forward_instance({40, 4, alpha, lambda, seed});
      out.push_back(UpdateProblem::create(std::move(c.a), std::move(c.u),
                                          std::move(c.v), std::move(c.a_inv)));
    }
  for (Index off : sweep_offsets(40, 4)) {
    auto c = build_backward_instance(
        {40, 4, 200.0, off, BackwardRegime::large_update, seed});
    out.push_back(UpdateProblem::create(std::move(c.a), std::move(c.u),
                                        std::move(c.v), std::move(c.a_inv)));
  }
  return out;
}

/// ||(A~^{-1} - A~^{-1} U Z^{-1} V^T A~^{-1})^{-1} - B|| against the improved
/// bound on well-conditioned instances.
inline CheckResult improved_bound_check(const VerifyOptions& opt) {
  auto c = make_check(check::improved_validity, opt.improved_instances);
  for (int i = 0; i < opt.improved_instances; ++i) {
    const std::uint64_t s = mix_seed(opt.seed ^ 0x6A6A000000000000ULL) + i;
    NormalRng rng(s);
    const Index n = 8 + static_cast<Index>(rng.uniform() * 33.0);
    const Index k = 1 + static_cast<Index>(rng.uniform() * 4.0);
    const Matrix a = identity(n) + gaussian_with_norm(n, n, 0.25, s ^ stream::matrix_a);
    const Matrix u = gaussian_with_norm(n, k, 0.25, s ^ stream::update_u);
    const Matrix v = gaussian_with_norm(n, k, 0.25, s ^ stream::update_v);
    GhadiriBoundInputs in = measure_ghadiri_inputs(a, u, v, 0.0, 0.0);
    in.eps1 = log_uniform(rng, -10.0, -2.0);
    const double rho7 = std::pow(in.rho, 7);
    in.eps2 = log_uniform(rng, -4.0, 0.0) / (512.0 * rho7);
    const MatrixSidePerturbation m = perturb_matrix_side(a, u, v, {in.eps1, in.eps2, s});
    const Matrix approx = smw_inverse_approx(m.a_tilde_inv, u, v, m.z_inv);
    const double err = two_norm(invert(approx) - (a + u * v.transpose()));
    const BoundReport r = ghadiri_two_norm_bound(in);
    if (r.assumptions_hold())
      c.record(err, r.value);
    else
      c.skip();
  }
  return c;
}

inline std::pair<CheckResult, CheckResult> yip_checks(const VerifyOptions& opt) {
  auto general = make_check(check::yip_general, 30);
  auto structured = make_check(check::yip_structured, 10);
  for (int i = 0; i < 30; ++i) {
    const ProblemPtr p = small_gaussian_problem(opt.seed ^ 0x7A7AULL, i);
    const BoundReport r = yip_capacitance_diagnostics(p->a(), p->u(), p->v());
    general.record(r.value, *r.detail("general_bound") * (1.0 + 1e-10));
  }
  int done = 0;
  for (BackwardRegime regime :
       {BackwardRegime::small_update, BackwardRegime::large_update}) {
    for (Index off : sweep_offsets(40, 4)) {
      const auto c = build_backward_instance(
          {40, 4, 0.5, off, regime, opt.seed + static_cast<std::uint64_t>(done)});
      const BoundReport r = yip_capacitance_diagnostics(c.a, c.u, c.v);
      ++done;
      if (!r.assumptions_hold()) {
        structured.record_flag(false, -infinity);
        continue;
      }
      structured.record(r.value, *r.detail("structured_bound") * (1.0 + 1e-10));
    }
  }
  return {general, structured};
}

}  // namespace detail

inline SuiteReport verify_bounds(const VerifyOptions& opt = {}) {
  detail::Stopwatch clock;
  struct Task {
    Index n, k;
    double lambda_factor;
    std::uint64_t seed;
  };
  const Index ns[] = {20, 100, 200};
  const Index ks[] = {1, 5, 10};
  const double factors[] = {0.1, 0.5, 2.0, 8.0};
  std::vector<Task> tasks;
  for (Index n : ns)
    for (Index k : ks)
      for (double f : factors)
        tasks.push_back({n, k, f,
                         mix_seed(opt.seed ^ 0xB0B0000000000000ULL) +
                             (static_cast<std::uint64_t>(tasks.size()) << 24)});
  // About a third of the draws land outside the backward hypotheses.
  const int draws = static_cast<int>(std::ceil(
      1.6 * opt.bound_instances / static_cast<double>(tasks.size())));

  std::vector<detail::BoundTally> tallies(tasks.size());
  for_each_trial(static_cast<int>(tasks.size()), opt.threads, [&](int i) {
    const Task& t = tasks[static_cast<std::size_t>(i)];
    tallies[static_cast<std::size_t>(i)] = detail::bound_validity_task(
        detail::gaussian_bound_problem(t.n, t.k, t.lambda_factor, t.seed), t.seed,
        draws);
  });
  // Engineered problems feed the corollary and consistency checks only; the
  // validity counts stay purely Gaussian.
  const auto engineered = detail::large_capacitance_problems(opt.seed);
  std::vector<detail::BoundTally> extra(engineered.size());
  for_each_trial(static_cast<int>(engineered.size()), opt.threads, [&](int i) {
    const auto idx = static_cast<std::size_t>(i);
    extra[idx] = detail::bound_validity_task(
        engineered[idx], mix_seed(opt.seed ^ 0xC0C0000000000000ULL) + (idx << 24), 24);
  });

  const char* names[detail::bound_check_count] = {
      check::forward_validity,   check::backward_validity,
      check::forward_simplified, check::forward_alpha_large,
      check::forward_kappa_v,    check::backward_simplified,
      check::backward_beta_large, check::backward_kappa_v,
      check::kappa_v_ordering,   check::term_sum,
      check::monotonicity};
  SuiteReport report{"bounds", {}, 0.0};
  for (int j = 0; j < detail::bound_check_count; ++j) {
    const bool validity = j == detail::fwd_valid || j == detail::bwd_valid;
    auto c = detail::make_check(names[j], validity ? opt.bound_instances : 0);
    for (const auto& t : tallies) c.merge(t.c[j]);
    if (!validity)
      for (const auto& t : extra) c.merge(t.c[j]);
    report.checks.push_back(c);
  }
  report.checks.push_back(detail::improved_bound_check(opt));
  auto [general, structured] = detail::yip_checks(opt);
  report.checks.push_back(general);
  report.checks.push_back(structured);
  report.seconds = clock.seconds();
  return report;
}

// ---------------------------------------------------------------------------
// Inverse-perturbation lemma

/// M = N + (sigma_n / 2) u_n v_n^T for the smallest singular triple of N.
/// Returns ||M^{-1} - N^{-1}|| / (2 rho^2 eps) with rho = 1/sigma_n,
/// eps = sigma_n / 2.
inline double lemma1_rank_one_ratio(const Matrix& n_mat) {
  const SvdFactors f = svd(n_mat);
  const Index last = f.singulars.size() - 1;
  const double sn = f.singulars(last);
  const Matrix m = n_mat + 0.5 * sn * f.left.col(last) * f.right.col(last).transpose();
  const Lemma1Bound b = lemma1_bound(1.0 / sn, 0.5 * sn);
  return two_norm(invert(m) - invert(n_mat)) / b.difference;
}

/// M = (c/2) I, N = c I: rho = 1/c, eps = c/2.
inline double lemma1_scalar_ratio(double c, Index n) {
  const Matrix m = (0.5 * c) * identity(n);
  const Matrix nn = c * identity(n);
  const Lemma1Bound b = lemma1_bound(1.0 / c, 0.5 * c);
  return two_norm(invert(m) - invert(nn)) / b.difference;
}

inline SuiteReport verify_lemma1(const VerifyOptions& opt = {}) {
  detail::Stopwatch clock;
  auto validity = detail::make_check(check::lemma1_validity, opt.lemma1_pairs);
  auto cap = detail::make_check(check::lemma1_inverse_cap, opt.lemma1_pairs);
  for (int i = 0; i < opt.lemma1_pairs; ++i) {
    const std::uint64_t s = mix_seed(opt.seed ^ 0x1E1E000000000000ULL) + i;
    NormalRng rng(s);
    const Index n = 2 + static_cast<Index>(rng.uniform() * 19.0);
    const Matrix g = gaussian_matrix(n, n, s ^ stream::matrix_a);
    const double target_min = 0.9 * detail::log_uniform(rng, -2.0, 0.0);
    const Matrix nn = g * (target_min / sigma_min(g));
    const double rho = 1.0 / sigma_min(nn);
    // Every tenth pair sits on the boundary eps = 1/(2 rho).
    const double eps = i % 10 == 0 ? 0.5 / rho
                                   : (0.5 / rho) * detail::log_uniform(rng, -6.0, 0.0);
    const Matrix m = nn + gaussian_with_norm(n, n, eps, s ^ stream::e1);
    const Lemma1Bound b = lemma1_bound(rho, eps);
    if (!b.admissible()) {
      validity.skip();
      cap.skip();
      continue;
    }
    const Matrix m_inv = invert(m);
    validity.record(two_norm(m_inv - invert(nn)), b.difference);
    cap.record(two_norm(m_inv), b.inverse_norm);
  }

  auto scalar = detail::make_check(check::lemma1_scalar, 1);
  double scalar_worst = 0.0;
  for (double c : {1.0, 0.5, 0.125}) {
    const double ratio = lemma1_scalar_ratio(c, 4);
    const double dev = std::abs(ratio - 1.0);
    scalar_worst = std::max(scalar_worst, dev);
    scalar.record_flag(dev <= 1e-12, (1e-12 - dev) / 1e-12);
  }
  scalar.note = "ratio(c=1) = " + detail::format_fixed("%.15f", lemma1_scalar_ratio(1.0, 4));

  auto rank_one = detail::make_check(check::lemma1_rank_one, 1);
  for (int i = 0; i < 20; ++i) {
    const Index n = 2 + i % 9;
    const double ratio = lemma1_rank_one_ratio(
        gaussian_matrix(n, n, mix_seed(opt.seed ^ 0x1313000000000000ULL) + i));
    const double dev = std::abs(ratio - 1.0 / 3.0);
    rank_one.record_flag(dev <= 1e-10, (1e-10 - dev) / 1e-10);
    if (i == 0) rank_one.note = "ratio = " + detail::format_fixed("%.15f", ratio);
  }

  auto zero = detail::make_check(check::lemma1_zero, 1);
  const Lemma1Bound z = lemma1_bound(3.0, 0.0);
  zero.record_flag(z.difference == 0.0, z.difference == 0.0 ? 1.0 : -infinity);

  return {"lemma1", {validity, cap, scalar, rank_one, zero}, clock.seconds()};
}

// ---------------------------------------------------------------------------
// Constructions

inline SuiteReport verify_constructions(const VerifyOptions& opt = {}) {
  detail::Stopwatch clock;
  auto fidelity = detail::make_check(check::forward_alpha_fidelity, 1);
  auto norms = detail::make_check(check::forward_norms, 1);
  auto cap = detail::make_check(check::backward_capacitance, 1);
  auto beta = detail::make_check(check::backward_beta, 1);
  auto determinism = detail::make_check(check::construction_determinism, 1);
  auto offsets = detail::make_check(check::offsets, 1);

  const std::pair<Index, Index> shapes[] = {{40, 4}, {200, 10}};
  const Vector targets = logspace(std::log10(2.0), 6.0, 13);
  for (auto [n, k] : shapes) {
    const Vector sigma = forward_singular_values(n);
    for (double lambda : {2.0 * sigma(n - 1), 2.0 * sigma(0)}) {
      for (Index i = 0; i < targets.size(); ++i) {
        const double alpha = targets(i);
        ConstructedInstance c;
        try {
          c = build_forward_instance({n, k, alpha, lambda, opt.seed});
        } catch (const ConstructionError&) {
          fidelity.record_flag(false, -infinity);
          continue;
        }
        const Matrix cap_fresh =
            identity(k) + c.v.transpose() * invert(c.a) * c.u;
        const double measured = 1.0 / sigma_min(cap_fresh);
        fidelity.record(std::abs(measured - alpha) / alpha, 1e-6);
        norms.record(std::abs(two_norm(c.u) - 1.0), 1e-12);
        const double lam = forward_construction_lambda(n, k, alpha, lambda);
        norms.record(std::abs(two_norm(c.v) - lam) / lam, 1e-12);
      }
    }
    for (BackwardRegime regime :
         {BackwardRegime::small_update, BackwardRegime::large_update}) {
      const Vector d = backward_diagonal(n, regime);
      const double lambda = regime == BackwardRegime::small_update
                                ? 100.0 * d.minCoeff()
                                : 2.0 * d.maxCoeff();
      for (Index off : sweep_offsets(n, k)) {
        const BackwardConstructionParams p{n, k, lambda, off, regime, opt.seed};
        ConstructedInstance c;
        try {
          c = build_backward_instance(p);
        } catch (const ConstructionError&) {
          cap.record_flag(false, -infinity);
          continue;
        }
        const double norm_u = d.segment(off, k).cwiseAbs().maxCoeff();
        const Matrix s = gaussian_direction(k, k, opt.seed ^ stream::small_core)
                             .scaled(lambda / norm_u);
        Matrix fresh = Matrix::Identity(k, k);
        for (Index r = 0; r < k; ++r)
          for (Index q = 0; q < k; ++q)
            for (Index j = 0; j < n; ++j)
              fresh(r, q) += c.v(j, r) * c.u(j, q) / d(j);
        const Matrix expected = Matrix::Identity(k, k) + s;
        cap.record((fresh - expected).cwiseAbs().maxCoeff(),
                   1e-12 * std::max(1.0, expected.cwiseAbs().maxCoeff()));
        const ProblemPtr prob = UpdateProblem::create(c.a, c.u, c.v, c.a_inv);
        const double want = two_norm(expected);
        beta.record(std::abs(prob->beta() - want) / want, 1e-12);
        const ConstructedInstance again = build_backward_instance(p);
        determinism.record_flag(again.a == c.a && again.u == c.u && again.v == c.v,
                                1.0);
      }
    }
    const ConstructedInstance f1 = build_forward_instance({n, k, 100.0, 1.0, opt.seed});
    const ConstructedInstance f2 = build_forward_instance({n, k, 100.0, 1.0, opt.seed});
    determinism.record_flag(f1.a == f2.a && f1.u == f2.u && f1.v == f2.v, 1.0);
  }

  const std::vector<Index> big = sweep_offsets(1000, 20);
  bool grid_ok = !big.empty() && big.front() == 250 && big.back() == 750 &&
                 big.size() == 26;
  for (std::size_t i = 1; i < big.size(); ++i)
    grid_ok = grid_ok && big[i] - big[i - 1] == 20;
  offsets.record_flag(grid_ok, grid_ok ? 1.0 : -infinity);

  return {"constructions", {fidelity, norms, cap, beta, determinism, offsets},
          clock.seconds()};
}

// ---------------------------------------------------------------------------
// Driver

enum class VerifyScope { all, identities, bounds, lemma1, constructions };

inline VerifyScope parse_verify_scope(const std::string& s) {
  if (s == "all") return VerifyScope::all;
  if (s == "identities") return VerifyScope::identities;
  if (s == "bounds") return VerifyScope::bounds;
  if (s == "lemma1") return VerifyScope::lemma1;
  if (s == "constructions") return VerifyScope::constructions;
  throw InvalidInputError("unknown verify scope '" + s +
                          "' (all, identities, bounds, lemma1, constructions)");
}

inline std::vector<SuiteReport> run_verification(VerifyScope scope,
                                                 const VerifyOptions& opt = {}) {
  std::vector<SuiteReport> out;
  const bool all = scope == VerifyScope::all;
  if (all || scope == VerifyScope::identities) out.push_back(verify_identities(opt));
  if (all || scope == VerifyScope::bounds) out.push_back(verify_bounds(opt));
  if (all || scope == VerifyScope::lemma1) out.push_back(verify_lemma1(opt));
  if (all || scope == VerifyScope::constructions) out.push_back(verify_constructions(opt));
  return out;
}

/// Fixed-width pass/fail table, one line per check.
inline std::string format_verification_table(const std::vector<SuiteReport>& suites) {
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-14s %-46s %8s %7s %8s %13s  %s\n", "suite",
                "check", "checked", "failed", "skipped", "worst margin", "status");
  out += line;
  for (const auto& s : suites) {
    for (const auto& c : s.checks) {
      std::snprintf(line, sizeof line, "%-14s %-46s %8d %7d %8d %13.4e  %s", s.name.c_str(),
                    c.name.c_str(), c.checked, c.failed, c.skipped,
                    c.checked ? c.worst_margin : 0.0, c.passed() ? "pass" : "FAIL");
      out += line;
      if (c.checked < c.minimum)
        out += "  (needs " + std::to_string(c.minimum) + ")";
      if (!c.note.empty()) out += "  " + c.note;
      out += '\n';
    }
    std::snprintf(line, sizeof line, "%-14s %.2fs %s\n", s.name.c_str(), s.seconds,
                  s.passed() ? "pass" : "FAIL");
    out += line;
  }
  return out;
}

}  // namespace smw
