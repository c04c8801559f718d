#pragma once

// Experiment configuration and its flat key=value text form.
//
// Every field is addressable by one key. Lines may be bare `key=value` or
// `#config:key=value`, so a CSV written by emit_csv doubles as its own config.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "smw/constructions.hpp"
#include "smw/linalg.hpp"

namespace smw {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// %.17g: enough digits to round-trip every double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& what) {
  const std::string t = s;
  if (t.empty()) throw ConfigError(what + ": empty number");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() || *end != '\0')
    throw ConfigError(what + ": not a number: '" + s + "'");
  return v;
}

inline long long parse_integer(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end == s.c_str() || *end != '\0')
    throw ConfigError(what + ": not an integer: '" + s + "'");
  return v;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

enum class Family { forward_eps, backward_eps, forward_alpha, backward_beta };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::forward_eps: return "forward-eps";
    case Family::backward_eps: return "backward-eps";
    case Family::forward_alpha: return "forward-alpha";
    case Family::backward_beta: return "backward-beta";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  for (Family f : {Family::forward_eps, Family::backward_eps,
                   Family::forward_alpha, Family::backward_beta})
    if (s == to_string(f)) return f;
  throw ConfigError("unknown family '" + s +
                    "' (expected forward-eps, backward-eps, forward-alpha "
                    "or backward-beta)");
}

/// lambda = ||U||_2 ||V||_2 relative to the extreme singular values of A.
struct UpdateScale {
  enum class Kind {
    half_sigma_min,
    half_sigma_max,
    twice_sigma_min,
    twice_sigma_max,
    hundred_sigma_min,
    explicit_value,
  };
  Kind kind = Kind::half_sigma_min;
  double value = 0.0;  // used by explicit_value only

  double lambda_for(double sigma_min_a, double sigma_max_a) const {
    switch (kind) {
      case Kind::half_sigma_min: return 0.5 * sigma_min_a;
      case Kind::half_sigma_max: return 0.5 * sigma_max_a;
      case Kind::twice_sigma_min: return 2.0 * sigma_min_a;
      case Kind::twice_sigma_max: return 2.0 * sigma_max_a;
      case Kind::hundred_sigma_min: return 100.0 * sigma_min_a;
      case Kind::explicit_value: return value;
    }
    return value;
  }

  bool relative_to_max() const {
    return kind == Kind::half_sigma_max || kind == Kind::twice_sigma_max;
  }

  std::string name() const {
    switch (kind) {
      case Kind::half_sigma_min: return "half-sigma-min";
      case Kind::half_sigma_max: return "half-sigma-max";
      case Kind::twice_sigma_min: return "twice-sigma-min";
      case Kind::twice_sigma_max: return "twice-sigma-max";
      case Kind::hundred_sigma_min: return "hundred-sigma-min";
      case Kind::explicit_value: return "explicit:" + format_double(value);
    }
    return "?";
  }

  /// File-name friendly label.
  std::string label() const {
    if (kind != Kind::explicit_value) return name();
    char buf[40];
    std::snprintf(buf, sizeof buf, "lambda%g", value);
    return buf;
  }

  static UpdateScale parse(const std::string& s) {
    UpdateScale u;
    if (s == "half-sigma-min") u.kind = Kind::half_sigma_min;
    else if (s == "half-sigma-max") u.kind = Kind::half_sigma_max;
    else if (s == "twice-sigma-min") u.kind = Kind::twice_sigma_min;
    else if (s == "twice-sigma-max") u.kind = Kind::twice_sigma_max;
    else if (s == "hundred-sigma-min") u.kind = Kind::hundred_sigma_min;
    else {
      const std::string body = s.rfind("explicit:", 0) == 0 ? s.substr(9) : s;
      u.kind = Kind::explicit_value;
      u.value = parse_double(body, "update_scale");
      if (!(u.value > 0.0) || !std::isfinite(u.value))
        throw ConfigError("update_scale: explicit lambda must be > 0");
    }
    return u;
  }
};

/// Which diagonal the backward-beta family uses. `automatic` follows the
/// update scale: relative to sigma_max -> large update, otherwise small.
enum class RegimeChoice { automatic, small_update, large_update };

struct ExperimentConfig {
  Family family = Family::forward_eps;
  Index n = 200;
  Index k = 10;
  UpdateScale update_scale;
  /// eps values, alpha targets, or block offsets (backward-beta).
  std::vector<double> sweep_grid;
  int trials = 20;
  std::uint64_t base_seed = 0;
  std::optional<double> eps_fixed;
  RegimeChoice regime = RegimeChoice::automatic;

  BackwardRegime backward_regime() const {
    switch (regime) {
      case RegimeChoice::small_update: return BackwardRegime::small_update;
      case RegimeChoice::large_update: return BackwardRegime::large_update;
      case RegimeChoice::automatic: break;
    }
    return update_scale.relative_to_max() ? BackwardRegime::large_update
                                          : BackwardRegime::small_update;
  }

  /// "<family>_<regime>_<n>x<k>.csv".
  std::string file_name() const {
    return std::string(to_string(family)) + "_" + update_scale.label() + "_" +
           std::to_string(n) + "x" + std::to_string(k) + ".csv";
  }

  void validate() const {
    if (n < 2 || k < 1 || k > n)
      throw ConfigError("config: need n >= 2 and 1 <= k <= n");
    if (trials < 1) throw ConfigError("config: trials must be >= 1");
    if (sweep_grid.empty()) throw ConfigError("config: sweep grid is empty");
    for (std::size_t i = 0; i < sweep_grid.size(); ++i) {
      if (!std::isfinite(sweep_grid[i]))
        throw ConfigError("config: grid values must be finite");
      if (i > 0 && sweep_grid[i] < sweep_grid[i - 1])
        throw ConfigError("config: grid must be sorted ascending");
    }
    const bool capacitance_sweep =
        family == Family::forward_alpha || family == Family::backward_beta;
    if (capacitance_sweep && !eps_fixed)
      throw ConfigError("config: eps_fixed is required for " +
                        std::string(to_string(family)));
    if (eps_fixed && (!(*eps_fixed >= 0.0) || !std::isfinite(*eps_fixed)))
      throw ConfigError("config: eps_fixed must be finite and >= 0");
    switch (family) {
      case Family::forward_eps:
      case Family::backward_eps:
        for (double e : sweep_grid)
          if (e < 0.0) throw ConfigError("config: eps grid must be >= 0");
        break;
      case Family::forward_alpha:
        for (double a : sweep_grid)
          if (!(a > 0.0)) throw ConfigError("config: alpha targets must be > 0");
        break;
      case Family::backward_beta:
        for (double o : sweep_grid)
          if (o < 0.0 || o != std::floor(o) ||
              static_cast<Index>(o) + k > n)
            throw ConfigError("config: block offsets must be integers with "
                              "offset + k <= n");
        break;
    }
  }
};

/// Grid text: comma-separated numbers, or `log:<lo>:<hi>:<count>` for count
/// points from 10^lo to 10^hi.
inline std::vector<double> parse_grid(const std::string& text) {
  const std::string s = trim(text);
  std::vector<double> out;
  if (s.rfind("log:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(s.substr(4));
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(trim(item));
    if (parts.size() != 3)
      throw ConfigError("grid: expected log:<lo>:<hi>:<count>");
    const double lo = parse_double(parts[0], "grid lo");
    const double hi = parse_double(parts[1], "grid hi");
    const long long count = parse_integer(parts[2], "grid count");
    if (count < 1) throw ConfigError("grid: count must be >= 1");
    const Vector v = logspace(lo, hi, static_cast<Index>(count));
    out.assign(v.data(), v.data() + v.size());
    return out;
  }
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(parse_double(trim(item), "grid"));
  if (out.empty()) throw ConfigError("grid: empty");
  return out;
}

inline std::string format_grid(const std::vector<double>& g) {
  std::string s;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (i) s += ',';
    s += format_double(g[i]);
  }
  return s;
}

/// Defaults for a family: grid, update scale and eps_fixed.
inline ExperimentConfig default_config(Family family) {
  ExperimentConfig c;
  c.family = family;
  switch (family) {
    case Family::forward_eps:
    case Family::backward_eps:
      c.update_scale.kind = UpdateScale::Kind::half_sigma_min;
      break;
    case Family::forward_alpha:
      c.update_scale.kind = UpdateScale::Kind::twice_sigma_min;
      break;
    case Family::backward_beta:
      c.update_scale.kind = UpdateScale::Kind::hundred_sigma_min;
      break;
  }
  return c;
}

/// Fill in anything left unset: the default grid for the family and the
/// eps_fixed value used for its update scale.
inline void resolve_defaults(ExperimentConfig& c) {
  if (c.sweep_grid.empty()) {
    Vector v;
    switch (c.family) {
      case Family::forward_eps:
      case Family::backward_eps:
        v = logspace(-8.0, 2.0, 41);
        c.sweep_grid.assign(v.data(), v.data() + v.size());
        break;
      case Family::forward_alpha:
        v = logspace(0.0, 6.0, 20);
        c.sweep_grid.assign(v.data(), v.data() + v.size());
        break;
      case Family::backward_beta:
        for (Index off : sweep_offsets(c.n, c.k))
          c.sweep_grid.push_back(static_cast<double>(off));
        break;
    }
  }
  if (!c.eps_fixed) {
    if (c.family == Family::forward_alpha)
      c.eps_fixed = c.update_scale.relative_to_max() ? 1e-10 : 1e-3;
    else if (c.family == Family::backward_beta)
      c.eps_fixed = 1e-6;
  }
}

inline const char* to_string(RegimeChoice r) {
  switch (r) {
    case RegimeChoice::automatic: return "auto";
    case RegimeChoice::small_update: return "small-update";
    case RegimeChoice::large_update: return "large-update";
  }
  return "?";
}

/// The effective configuration as ordered key/value pairs.
inline std::vector<std::pair<std::string, std::string>> to_key_values(
    const ExperimentConfig& c) {
  std::vector<std::pair<std::string, std::string>> kv = {
      {"family", to_string(c.family)},
      {"n", std::to_string(c.n)},
      {"k", std::to_string(c.k)},
      {"update_scale", c.update_scale.name()},
      {"trials", std::to_string(c.trials)},
      {"seed", std::to_string(c.base_seed)},
      {"eps_fixed", c.eps_fixed ? format_double(*c.eps_fixed) : "none"},
      {"regime", to_string(c.regime)},
      {"grid", format_grid(c.sweep_grid)},
  };
  return kv;
}

inline void apply_key_value(ExperimentConfig& c, const std::string& key,
                            const std::string& value) {
  const std::string v = trim(value);
  if (key == "family") c.family = parse_family(v);
  else if (key == "n") c.n = static_cast<Index>(parse_integer(v, "n"));
  else if (key == "k") c.k = static_cast<Index>(parse_integer(v, "k"));
  else if (key == "update_scale") c.update_scale = UpdateScale::parse(v);
  else if (key == "trials") c.trials = static_cast<int>(parse_integer(v, "trials"));
  else if (key == "seed") {
    char* end = nullptr;
    const unsigned long long s = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0' || v[0] == '-')
      throw ConfigError("seed: not a non-negative integer: '" + v + "'");
    c.base_seed = s;
  } else if (key == "eps_fixed") {
    if (v == "none" || v.empty()) c.eps_fixed.reset();
    else c.eps_fixed = parse_double(v, "eps_fixed");
  } else if (key == "regime") {
    if (v == "auto") c.regime = RegimeChoice::automatic;
    else if (v == "small-update") c.regime = RegimeChoice::small_update;
    else if (v == "large-update") c.regime = RegimeChoice::large_update;
    else throw ConfigError("regime: expected auto, small-update or large-update");
  } else if (key == "grid" || key == "eps_grid") {
    c.sweep_grid = parse_grid(v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Collect key=value pairs from config text. Blank lines and '#' comments are
/// skipped except `#config:` lines; CSV data lines (no '=') are ignored so an
/// emitted CSV can be fed back in.
inline KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.rfind("#config:", 0) == 0) t = t.substr(8);
    else if (t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) continue;
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

/// Build a config from pairs: the family's defaults first, then every pair in
/// order (later pairs win), then resolve_defaults.
inline ExperimentConfig config_from_key_values(const KeyValues& kv) {
  Family family = Family::forward_eps;
  for (const auto& [k, v] : kv)
    if (k == "family") family = parse_family(v);
  ExperimentConfig c = default_config(family);
  for (const auto& [k, v] : kv) apply_key_value(c, k, v);
  resolve_defaults(c);
  c.validate();
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  return config_from_key_values(parse_key_values(text));
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ExperimentConfig load_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

inline std::string config_text(const ExperimentConfig& c,
                               const std::string& prefix = "") {
  std::string s;
  for (const auto& [k, v] : to_key_values(c)) s += prefix + k + "=" + v + "\n";
  return s;
}

}  // namespace smw
