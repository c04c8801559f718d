#pragma once

// Presets for the four published experiment figures and the slope summaries
// printed next to each emitted CSV.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "smw/config.hpp"
#include "smw/experiments.hpp"

namespace smw {

enum class Scale { desk, paper };

inline Scale parse_scale(const std::string& s) {
  if (s == "desk") return Scale::desk;
  if (s == "paper") return Scale::paper;
  throw ConfigError("scale: expected desk or paper, got '" + s + "'");
}

inline const char* to_string(Scale s) { return s == Scale::desk ? "desk" : "paper"; }

/// n = 1000, k = 20, 100 trials.
inline void apply_paper_scale(ExperimentConfig& c) {
  c.n = 1000;
  c.k = 20;
  c.trials = 100;
}

/// One config per panel, small update first.
inline std::vector<ExperimentConfig> figure_configs(int which, Scale scale,
                                                    std::uint64_t seed = 0) {
  using K = UpdateScale::Kind;
  Family family;
  K small, large;
  double eps_small = 0.0, eps_large = 0.0;
  switch (which) {
    case 1:
      family = Family::forward_eps;
      small = K::half_sigma_min;
      large = K::half_sigma_max;
      break;
    case 2:
      family = Family::backward_eps;
      small = K::half_sigma_min;
      large = K::half_sigma_max;
      break;
    case 3:
      family = Family::forward_alpha;
      small = K::twice_sigma_min;
      large = K::twice_sigma_max;
      eps_small = 1e-3;
      eps_large = 1e-10;
      break;
    case 4:
      family = Family::backward_beta;
      small = K::hundred_sigma_min;
      large = K::twice_sigma_max;
      eps_small = eps_large = 1e-6;
      break;
    default:
      throw ConfigError("figure: expected 1, 2, 3 or 4, got " +
                        std::to_string(which));
  }
  std::vector<ExperimentConfig> out;
  for (int panel = 0; panel < 2; ++panel) {
    ExperimentConfig c = default_config(family);
    c.update_scale.kind = panel == 0 ? small : large;
    c.base_seed = seed;
    if (scale == Scale::paper) apply_paper_scale(c);
    if (which >= 3) c.eps_fixed = panel == 0 ? eps_small : eps_large;
    resolve_defaults(c);
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

/// Log-log slopes of the mean error: over [1e-8, 1e-2] for eps sweeps, over
/// the whole grid and its top decade for alpha and beta sweeps. Slopes that
/// cannot be fitted (fewer than two usable rows) are NaN.
inline std::vector<NamedValue> slope_summary(const SweepResult& r) {
  auto guarded = [](auto&& fn) {
    try {
      return fn();
    } catch (const InvalidInputError&) {
      return quiet_nan;
    }
  };
  std::vector<NamedValue> out;
  const Family f = r.config.family;
  if (f == Family::forward_eps || f == Family::backward_eps) {
    out.push_back({"slope_eps_1e-8_1e-2",
                   guarded([&] { return sweep_slope(r.rows, 1e-8, 1e-2); })});
  } else {
    out.push_back({"slope_all", guarded([&] {
                     return sweep_slope(r.rows, 0.0, infinity);
                   })});
    out.push_back({"slope_top_decade",
                   guarded([&] { return top_decade_slope(r.rows); })});
  }
  return out;
}

/// Human summary for standard error: thresholds then slopes.
inline std::string summary_text(const SweepResult& r) {
  std::string s = std::string(to_string(r.config.family)) + " " +
                  r.config.update_scale.name() + " n=" +
                  std::to_string(r.config.n) + " k=" +
                  std::to_string(r.config.k) + "\n";
  for (const auto& t : r.thresholds)
    s += "  threshold " + t.name + " = " + format_double(t.value) + "\n";
  for (const auto& t : slope_summary(r))
    s += "  " + t.name + " = " + format_double(t.value) + "\n";
  int failed = 0;
  for (const auto& row : r.rows) failed += row.failed_trials;
  s += "  failed_trials = " + std::to_string(failed) + "\n";
  return s;
}

}  // namespace smw
