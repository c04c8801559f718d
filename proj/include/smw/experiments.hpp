#pragma once

// The four sweep families, trial-parallel with a deterministic merge, plus
// CSV emission/parsing and log-log slope regression.
//
// Seeds: the instance matrices derive from base_seed alone; trial t uses
// base_seed + t for E1, E2 (and E3 for the direct baseline). One trial draws
// its noise directions once and rescales them at every grid point.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "smw/bounds.hpp"
#include "smw/config.hpp"
#include "smw/constructions.hpp"
#include "smw/linalg.hpp"
#include "smw/noise.hpp"
#include "smw/perturbation.hpp"
#include "smw/random.hpp"
#include "smw/woodbury.hpp"

namespace smw {

inline constexpr double quiet_nan = std::numeric_limits<double>::quiet_NaN();

struct SweepRow {
  double sweep_value = 0.0;
  double mean_actual_error = quiet_nan;
  double bound_full = 0.0;
  double bound_simplified = 0.0;
  double bound_dominant_term = 0.0;
  std::optional<double> baseline_direct;
  double assumptions_ok_fraction = 0.0;
  int failed_trials = 0;
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<SweepRow> rows;
  /// Largest sweep value (or eps) satisfying each assumption.
  std::vector<NamedValue> thresholds;
  /// Per grid point, per trial error; NaN marks a failed trial. Not emitted.
  std::vector<std::vector<double>> trial_errors;
  /// Full bound reports per grid point (assumption flags in detail).
  std::vector<BoundReport> full_reports;

  std::optional<double> threshold(const std::string& name) const {
    for (const auto& t : thresholds)
      if (t.name == name) return t.value;
    return std::nullopt;
  }
};

struct RunOptions {
  /// Worker cap; 0 = hardware concurrency.
  unsigned threads = 0;
};

// ---------------------------------------------------------------------------
// Parallel trial loop

/// Runs fn(t) for t in [0, trials) on up to `threads` workers. Each trial
/// writes only its own slots, so the merge order is fixed by index. The
/// exception of the lowest failing trial is rethrown.
template <class Fn>
void for_each_trial(int trials, unsigned threads, Fn&& fn) {
  unsigned workers = threads ? threads : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(trials)));
  if (workers == 1) {
    for (int t = 0; t < trials; ++t) fn(t);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(trials));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int t; (t = next.fetch_add(1)) < trials;) {
        try {
          fn(t);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::uint64_t trial_seed(std::uint64_t base_seed, int trial) {
  return base_seed + static_cast<std::uint64_t>(trial);
}

/// Arithmetic mean over finite entries, in index order; NaN when none.
inline double mean_of_finite(const std::vector<double>& xs, int* failed = nullptr) {
  double sum = 0.0;
  int count = 0;
  for (double x : xs)
    if (std::isfinite(x)) {
      sum += x;
      ++count;
    }
  if (failed) *failed = static_cast<int>(xs.size()) - count;
  return count ? sum / count : quiet_nan;
}

/// Share of the inequality hypotheses that hold. Invertibility flags are
/// excluded: they are not measured in sweeps (a non-invertible trial fails).
inline double inequality_ok_fraction(const BoundReport& r) {
  int total = 0, ok = 0;
  for (const auto& a : r.assumptions) {
    if (a.name.find("invertible") != std::string::npos) continue;
    ++total;
    ok += a.ok ? 1 : 0;
  }
  return total ? static_cast<double>(ok) / total : 1.0;
}

inline bool inequality_assumptions_hold(const BoundReport& r) {
  return inequality_ok_fraction(r) == 1.0;
}

// ---------------------------------------------------------------------------
// Single-trial evaluations (also used to recheck averages)

/// ||B~^{-1} - B^{-1}||_2, or NaN when an intermediate is singular.
inline double trial_forward_error(const ProblemPtr& problem, double eps,
                                  const PerturbationDirections& dirs) {
  try {
    return forward_error(perturb_instance(problem, eps, eps, dirs));
  } catch (const SingularMatrixError&) {
    return quiet_nan;
  }
}

/// ||(B~^{-1})^{-1} - B||_2, or NaN when an intermediate is singular.
inline double trial_backward_error(const ProblemPtr& problem, double eps,
                                   const PerturbationDirections& dirs) {
  try {
    return backward_error(perturb_instance(problem, eps, eps, dirs));
  } catch (const SingularMatrixError&) {
    return quiet_nan;
  }
}

inline double trial_forward_error(const ProblemPtr& problem, double eps,
                                  std::uint64_t seed) {
  return trial_forward_error(
      problem, eps, perturbation_directions(problem->n(), problem->k(), seed));
}

inline double trial_backward_error(const ProblemPtr& problem, double eps,
                                   std::uint64_t seed) {
  return trial_backward_error(
      problem, eps, perturbation_directions(problem->n(), problem->k(), seed));
}

// ---------------------------------------------------------------------------
// Instances

/// Seeded Gaussian A with Gaussian U, V scaled to ||U|| = ||V|| = sqrt(lambda).
inline ProblemPtr gaussian_problem(const ExperimentConfig& cfg) {
  Matrix a = gaussian_matrix(cfg.n, cfg.n, cfg.base_seed ^ stream::matrix_a);
  const Vector s = singular_values(a);
  const double lambda = cfg.update_scale.lambda_for(s(s.size() - 1), s(0));
  auto [u, v] = make_update_pair(cfg.n, cfg.k, lambda,
                                 cfg.base_seed ^ stream::updates);
  return UpdateProblem::create(std::move(a), std::move(u), std::move(v));
}

inline double forward_family_lambda(const ExperimentConfig& cfg) {
  const Vector s = forward_singular_values(cfg.n);
  return cfg.update_scale.lambda_for(s(s.size() - 1), s(0));
}

inline ProblemPtr forward_alpha_problem(const ExperimentConfig& cfg,
                                        double alpha_target) {
  ConstructedInstance c = build_forward_instance(
      {cfg.n, cfg.k, alpha_target, forward_family_lambda(cfg), cfg.base_seed});
  return UpdateProblem::create(std::move(c.a), std::move(c.u), std::move(c.v),
                               std::move(c.a_inv));
}

inline double backward_family_lambda(const ExperimentConfig& cfg) {
  const Vector d = backward_diagonal(cfg.n, cfg.backward_regime());
  return cfg.update_scale.lambda_for(d.minCoeff(), d.maxCoeff());
}

inline ProblemPtr backward_beta_problem(const ExperimentConfig& cfg,
                                        Index offset) {
  ConstructedInstance c = build_backward_instance(
      {cfg.n, cfg.k, backward_family_lambda(cfg), offset,
       cfg.backward_regime(), cfg.base_seed});
  return UpdateProblem::create(std::move(c.a), std::move(c.u), std::move(c.v),
                               std::move(c.a_inv));
}

/// Largest alpha with 2 lambda(alpha) alpha eps < 1 for the forward family,
/// where lambda(alpha) = ||V||_2 moves with alpha (bisection in log alpha).
inline double forward_family_alpha_threshold(const ExperimentConfig& cfg,
                                             double eps) {
  if (eps == 0.0) return infinity;
  const double lam = forward_family_lambda(cfg);
  auto g = [&](double alpha) {
    return 2.0 * forward_construction_lambda(cfg.n, cfg.k, alpha, lam) *
               alpha * eps -
           1.0;
  };
  double lo = 1.0, hi = 1.0;
  if (g(lo) >= 0.0) return forward_alpha_threshold(
      forward_construction_lambda(cfg.n, cfg.k, 1.0, lam), eps);
  while (g(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) return infinity;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Sweep engine

namespace detail {

struct PointPlan {
  ProblemPtr problem;
  double eps = 0.0;
};

/// Runs every trial over every point and fills trial_errors (and the direct
/// baseline when requested).
inline void run_trials(const ExperimentConfig& cfg,
                       const std::vector<PointPlan>& points, bool backward,
                       bool with_baseline, const RunOptions& opt,
                       std::vector<std::vector<double>>& errors,
                       std::vector<std::vector<double>>& baseline) {
  const auto np = points.size();
  const auto nt = static_cast<std::size_t>(cfg.trials);
  errors.assign(np, std::vector<double>(nt, quiet_nan));
  if (with_baseline) baseline.assign(np, std::vector<double>(nt, quiet_nan));

  Matrix b_inv_direct;
  if (with_baseline) b_inv_direct = invert(points.front().problem->b());

  for_each_trial(cfg.trials, opt.threads, [&](int t) {
    const std::uint64_t seed = trial_seed(cfg.base_seed, t);
    const PerturbationDirections dirs =
        perturbation_directions(cfg.n, cfg.k, seed);
    std::optional<GaussianDirection> e3;
    if (with_baseline) e3 = gaussian_direction(cfg.n, cfg.n, seed ^ stream::e3);
    for (std::size_t i = 0; i < np; ++i) {
      const auto& p = points[i];
      errors[i][static_cast<std::size_t>(t)] =
          backward ? trial_backward_error(p.problem, p.eps, dirs)
                   : trial_forward_error(p.problem, p.eps, dirs);
      if (with_baseline) {
        try {
          const Matrix perturbed = b_inv_direct + e3->scaled(p.eps);
          baseline[i][static_cast<std::size_t>(t)] =
              two_norm(invert(perturbed) - p.problem->b());
        } catch (const SingularMatrixError&) {
        }
      }
    }
  });
}

inline void fill_means(SweepResult& r,
                       const std::vector<std::vector<double>>& baseline) {
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    r.rows[i].mean_actual_error =
        mean_of_finite(r.trial_errors[i], &r.rows[i].failed_trials);
    if (!baseline.empty())
      r.rows[i].baseline_direct = mean_of_finite(baseline[i]);
  }
}

inline void require_family(const ExperimentConfig& cfg, Family f) {
  if (cfg.family != f)
    throw ConfigError(std::string("sweep expects family ") + to_string(f) +
                      ", got " + to_string(cfg.family));
}

}  // namespace detail

/// Forward error vs eps = eps1 = eps2 on one fixed Gaussian instance.
inline SweepResult run_forward_eps_sweep(ExperimentConfig cfg,
                                         const RunOptions& opt = {}) {
  detail::require_family(cfg, Family::forward_eps);
  resolve_defaults(cfg);
  cfg.validate();
  const ProblemPtr problem = gaussian_problem(cfg);
  const BoundInputs base = measure_inputs(*problem, 0.0, 0.0, MeasureScope::core);

  SweepResult r;
  r.config = cfg;
  std::vector<detail::PointPlan> points;
  for (double eps : cfg.sweep_grid) {
    points.push_back({problem, eps});
    BoundInputs in = base;
    in.eps1 = in.eps2 = eps;
    BoundReport full = forward_bound(in);
    SweepRow row;
    row.sweep_value = eps;
    row.bound_full = full.value;
    row.bound_simplified = forward_bound_simplified(in).value;
    row.bound_dominant_term = 2.0 * eps * in.norm_a_inv;
    row.assumptions_ok_fraction = inequality_ok_fraction(full);
    r.rows.push_back(row);
    r.full_reports.push_back(std::move(full));
  }
  std::vector<std::vector<double>> none;
  detail::run_trials(cfg, points, false, false, opt, r.trial_errors, none);
  detail::fill_means(r, none);
  r.thresholds = {
      {"eps_max_lambda_alpha", forward_eps_threshold(base.lambda, base.alpha)},
      {"lambda", base.lambda},
      {"alpha", base.alpha},
      {"norm_a_inv", base.norm_a_inv},
  };
  return r;
}

/// Backward error vs eps with the direct-inversion baseline.
inline SweepResult run_backward_eps_sweep(ExperimentConfig cfg,
                                          const RunOptions& opt = {}) {
  detail::require_family(cfg, Family::backward_eps);
  resolve_defaults(cfg);
  cfg.validate();
  const ProblemPtr problem = gaussian_problem(cfg);
  const BoundInputs base = measure_inputs(*problem, 0.0, 0.0, MeasureScope::core);

  SweepResult r;
  r.config = cfg;
  std::vector<detail::PointPlan> points;
  for (double eps : cfg.sweep_grid) {
    points.push_back({problem, eps});
    BoundInputs in = base;
    in.eps1 = in.eps2 = eps;
    BoundReport full = backward_bound(in);
    SweepRow row;
    row.sweep_value = eps;
    row.bound_full = full.value;
    row.bound_simplified = backward_bound_simplified(in).value;
    row.bound_dominant_term = 2.0 * eps * in.norm_a * in.norm_a;
    row.assumptions_ok_fraction = inequality_ok_fraction(full);
    r.rows.push_back(row);
    r.full_reports.push_back(std::move(full));
  }
  std::vector<std::vector<double>> baseline;
  detail::run_trials(cfg, points, true, true, opt, r.trial_errors, baseline);
  detail::fill_means(r, baseline);
  r.thresholds = {
      {"eps_max_norm_a", backward_eps1_threshold(base.norm_a)},
      {"eps_max_beta", backward_eps2_threshold(base.beta, base.lambda)},
      {"eps_max_product", backward_product_threshold(base.beta, base.lambda)},
      {"lambda", base.lambda},
      {"beta", base.beta},
      {"norm_a", base.norm_a},
  };
  return r;
}

/// Forward error vs measured alpha on the forward construction.
inline SweepResult run_forward_alpha_sweep(ExperimentConfig cfg,
                                           const RunOptions& opt = {}) {
  detail::require_family(cfg, Family::forward_alpha);
  resolve_defaults(cfg);
  cfg.validate();
  const double eps = *cfg.eps_fixed;

  SweepResult r;
  r.config = cfg;
  std::vector<detail::PointPlan> points;
  for (double target : cfg.sweep_grid) {
    ProblemPtr problem = forward_alpha_problem(cfg, target);
    BoundInputs in = measure_inputs(*problem, eps, eps, MeasureScope::core);
    BoundReport full = forward_bound(in);
    SweepRow row;
    row.sweep_value = in.alpha;
    row.bound_full = full.value;
    row.bound_simplified = forward_bound_alpha_large(in).value;
    row.bound_dominant_term = 2.0 * in.norm_a_inv * in.norm_a_inv * in.lambda *
                              in.lambda * in.alpha * in.alpha * eps;
    row.assumptions_ok_fraction = inequality_ok_fraction(full);
    r.rows.push_back(row);
    r.full_reports.push_back(std::move(full));
    points.push_back({std::move(problem), eps});
  }
  std::vector<std::vector<double>> none;
  detail::run_trials(cfg, points, false, false, opt, r.trial_errors, none);
  detail::fill_means(r, none);
  r.thresholds = {
      {"alpha_max_lambda_eps", forward_family_alpha_threshold(cfg, eps)},
      {"lambda_nominal", forward_family_lambda(cfg)},
      {"eps", eps},
  };
  return r;
}

/// Backward error vs measured beta on the backward construction, one row per
/// block offset.
inline SweepResult run_backward_beta_sweep(ExperimentConfig cfg,
                                           const RunOptions& opt = {}) {
  detail::require_family(cfg, Family::backward_beta);
  resolve_defaults(cfg);
  cfg.validate();
  const double eps = *cfg.eps_fixed;

  SweepResult r;
  r.config = cfg;
  std::vector<detail::PointPlan> points;
  double norm_a = 0.0, lambda = 0.0;
  for (double off : cfg.sweep_grid) {
    ProblemPtr problem = backward_beta_problem(cfg, static_cast<Index>(off));
    BoundInputs in = measure_inputs(*problem, eps, eps, MeasureScope::core);
    norm_a = in.norm_a;
    lambda = in.lambda;
    BoundReport full = backward_bound(in);
    SweepRow row;
    row.sweep_value = in.beta;
    row.bound_full = full.value;
    row.bound_simplified = backward_bound_beta_large(in).value;
    row.bound_dominant_term = 4.0 * in.lambda * eps * in.beta * in.beta;
    row.assumptions_ok_fraction = inequality_ok_fraction(full);
    r.rows.push_back(row);
    r.full_reports.push_back(std::move(full));
    points.push_back({std::move(problem), eps});
  }
  std::vector<std::vector<double>> none;
  detail::run_trials(cfg, points, true, false, opt, r.trial_errors, none);
  detail::fill_means(r, none);
  r.thresholds = {
      {"beta_max_eps2", backward_beta_threshold_eps2(eps, eps, lambda)},
      {"beta_max_product", backward_beta_threshold_product(eps, eps, lambda)},
      {"eps_max_norm_a", backward_eps1_threshold(norm_a)},
      {"lambda", lambda},
      {"eps", eps},
  };
  return r;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg,
                             const RunOptions& opt = {}) {
  switch (cfg.family) {
    case Family::forward_eps: return run_forward_eps_sweep(cfg, opt);
    case Family::backward_eps: return run_backward_eps_sweep(cfg, opt);
    case Family::forward_alpha: return run_forward_alpha_sweep(cfg, opt);
    case Family::backward_beta: return run_backward_beta_sweep(cfg, opt);
  }
  throw ConfigError("unknown family");
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* csv_header =
    "sweep_value,mean_actual_error,bound_full,bound_simplified,"
    "bound_dominant_term,baseline_direct,assumptions_ok_fraction,"
    "failed_trials";

/// The effective config as `#config:` lines, the header, one line per row,
/// then `#threshold:<name>=<value>` lines.
inline std::string csv_text(const SweepResult& r) {
  std::string s = config_text(r.config, "#config:");
  s += csv_header;
  s += '\n';
  for (const auto& row : r.rows) {
    s += format_double(row.sweep_value) + ',' +
         format_double(row.mean_actual_error) + ',' +
         format_double(row.bound_full) + ',' +
         format_double(row.bound_simplified) + ',' +
         format_double(row.bound_dominant_term) + ',' +
         (row.baseline_direct ? format_double(*row.baseline_direct) : "") +
         ',' + format_double(row.assumptions_ok_fraction) + ',' +
         std::to_string(row.failed_trials) + '\n';
  }
  for (const auto& t : r.thresholds)
    s += "#threshold:" + t.name + "=" + format_double(t.value) + "\n";
  return s;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline void emit_csv(const SweepResult& r, const std::string& path) {
  write_text_file(path, csv_text(r));
}

/// Parsed CSV: rows, thresholds and the raw `#config:` pairs.
struct ParsedCsv {
  std::vector<SweepRow> rows;
  std::vector<NamedValue> thresholds;
  KeyValues config;
};

inline ParsedCsv parse_csv_text(const std::string& text) {
  ParsedCsv out;
  std::stringstream ss(text);
  std::string line;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#threshold:", 0) == 0) {
      const std::string body = line.substr(11);
      const auto eq = body.find('=');
      if (eq == std::string::npos)
        throw ConfigError("csv line " + std::to_string(lineno) +
                          ": malformed threshold");
      out.thresholds.push_back(
          {body.substr(0, eq), parse_double(body.substr(eq + 1), "threshold")});
      continue;
    }
    if (line.rfind("#config:", 0) == 0) {
      const std::string body = line.substr(8);
      const auto eq = body.find('=');
      if (eq != std::string::npos)
        out.config.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {
      if (line != csv_header)
        throw ConfigError("csv line " + std::to_string(lineno) +
                          ": unexpected header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 8)
      throw ConfigError("csv line " + std::to_string(lineno) +
                        ": expected 8 fields");
    SweepRow row;
    row.sweep_value = parse_double(f[0], "sweep_value");
    row.mean_actual_error = parse_double(f[1], "mean_actual_error");
    row.bound_full = parse_double(f[2], "bound_full");
    row.bound_simplified = parse_double(f[3], "bound_simplified");
    row.bound_dominant_term = parse_double(f[4], "bound_dominant_term");
    if (!f[5].empty()) row.baseline_direct = parse_double(f[5], "baseline_direct");
    row.assumptions_ok_fraction = parse_double(f[6], "assumptions_ok_fraction");
    row.failed_trials = static_cast<int>(parse_integer(f[7], "failed_trials"));
    out.rows.push_back(row);
  }
  if (!header_seen) throw ConfigError("csv: header row missing");
  return out;
}

inline ParsedCsv parse_csv_file(const std::string& path) {
  return parse_csv_text(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Slopes

/// Least-squares slope of log10(y) against log10(x). Needs >= 2 distinct x.
inline double loglog_slope(const std::vector<double>& x,
                           const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InvalidInputError("loglog_slope: need two or more paired points");
  double mx = 0.0, my = 0.0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw InvalidInputError("loglog_slope: values must be positive");
    mx += std::log10(x[i]);
    my += std::log10(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log10(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log10(y[i]) - my);
  }
  if (!(sxx > 0.0))
    throw InvalidInputError("loglog_slope: x values are all equal");
  return sxy / sxx;
}

/// Slope of mean_actual_error vs sweep_value over rows with sweep value in
/// [lo, hi] and a finite positive mean.
inline double sweep_slope(const std::vector<SweepRow>& rows, double lo,
                          double hi) {
  std::vector<double> x, y;
  for (const auto& r : rows)
    if (r.sweep_value >= lo && r.sweep_value <= hi &&
        std::isfinite(r.mean_actual_error) && r.mean_actual_error > 0.0) {
      x.push_back(r.sweep_value);
      y.push_back(r.mean_actual_error);
    }
  return loglog_slope(x, y);
}

/// Slope over the top decade of the sweep values: [max/10, max].
inline double top_decade_slope(const std::vector<SweepRow>& rows) {
  double top = 0.0;
  for (const auto& r : rows) top = std::max(top, r.sweep_value);
  return sweep_slope(rows, top / 10.0, top);
}

}  // namespace smw
