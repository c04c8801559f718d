// smw: verification suites and error-bound sweeps for approximate
// Sherman-Morrison-Woodbury inverses.
//
//   smw verify <all|identities|bounds|lemma1|constructions>
//   smw sweep --family <f> [--config <path>] [--n --k --trials --seed ...]
//   smw figure <1|2|3|4> [--scale desk|paper] [--out <dir>]
//
// Machine-readable output (CSV files, key=value lines) goes to files and
// stdout; tables and summaries go to stderr.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>

#include "smw.hpp"

namespace {

enum ExitCode : int {
  exit_ok = 0,
  exit_check_failed = 1,
  exit_usage = 2,
  exit_numerical = 3,
  exit_io = 4,
};

namespace fs = std::filesystem;

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw smw::IoError("cannot create output directory '" + dir + "'" +
                       (ec ? ": " + ec.message() : std::string()));
}

/// Writes <dir>/<name>.csv and the matching .cfg, reports both on stdout.
void emit(const smw::SweepResult& r, const std::string& dir) {
  ensure_directory(dir);
  const fs::path csv = fs::path(dir) / r.config.file_name();
  fs::path cfg = csv;
  cfg.replace_extension(".cfg");
  smw::emit_csv(r, csv.string());
  smw::write_text_file(cfg.string(), smw::config_text(r.config));
  std::cout << "csv=" << csv.string() << "\n" << "config=" << cfg.string() << "\n";
  std::cerr << smw::summary_text(r);
}

struct SweepFlags {
  std::string config_path;
  std::optional<std::string> family, update_scale, grid, regime, eps_fixed;
  std::optional<long long> n, k, trials;
  std::optional<unsigned long long> seed;
  bool paper_scale = false;
};

smw::ExperimentConfig resolve_sweep_config(const SweepFlags& f) {
  smw::KeyValues kv;
  if (!f.config_path.empty())
    kv = smw::parse_key_values(smw::read_text_file(f.config_path));
  if (f.paper_scale) {
    kv.emplace_back("n", "1000");
    kv.emplace_back("k", "20");
    kv.emplace_back("trials", "100");
  }
  auto put = [&](const char* key, const auto& value) {
    if (!value) return;
    if constexpr (std::is_same_v<std::decay_t<decltype(*value)>, std::string>)
      kv.emplace_back(key, *value);
    else
      kv.emplace_back(key, std::to_string(*value));
  };
  put("family", f.family);
  put("n", f.n);
  put("k", f.k);
  put("update_scale", f.update_scale);
  put("trials", f.trials);
  put("seed", f.seed);
  put("eps_fixed", f.eps_fixed);
  put("regime", f.regime);
  put("grid", f.grid);
  return smw::config_from_key_values(kv);
}

int run_verify(const std::string& scope_text, std::uint64_t seed, unsigned threads) {
  smw::VerifyOptions opt;
  opt.seed = seed;
  opt.threads = threads;
  const auto suites = smw::run_verification(smw::parse_verify_scope(scope_text), opt);
  std::cerr << smw::format_verification_table(suites);
  bool ok = true;
  for (const auto& s : suites) {
    for (const auto& c : s.checks) {
      std::cout << "check=" << s.name << "/" << c.name
                << " status=" << (c.passed() ? "pass" : "fail")
                << " checked=" << c.checked << " failed=" << c.failed
                << " worst_margin=" << smw::format_double(c.worst_margin) << "\n";
      if (!c.passed())
        std::cerr << "failing property: " << s.name << ": " << c.name << "\n";
    }
    ok = ok && s.passed();
  }
  std::cout << "result=" << (ok ? "pass" : "fail") << "\n";
  return ok ? exit_ok : exit_check_failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate Sherman-Morrison-Woodbury inverses: error bounds, "
               "verification suites and experiment sweeps"};
  app.require_subcommand(1);

  unsigned threads = 0;
  std::string verify_scope;
  unsigned long long verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "Run property suites");
  verify->add_option("scope", verify_scope, "all, identities, bounds, lemma1, constructions")
      ->required()
      ->check(CLI::IsMember({"all", "identities", "bounds", "lemma1", "constructions"}));
  verify->add_option("--seed", verify_seed, "Base seed for the suites");
  verify->add_option("--threads", threads, "Worker cap (0 = all cores)");

  SweepFlags sf;
  std::string out_dir = ".";
  auto* sweep = app.add_subcommand("sweep", "Run one experiment sweep and write its CSV");
  sweep->add_option("--config", sf.config_path, "key=value config file (an emitted CSV works too)");
  sweep->add_option("--family", sf.family, "forward-eps, backward-eps, forward-alpha, backward-beta");
  sweep->add_option("--n", sf.n, "Matrix size");
  sweep->add_option("--k", sf.k, "Update rank");
  sweep->add_option("--trials", sf.trials, "Trials per grid point");
  sweep->add_option("--seed", sf.seed, "Base seed");
  sweep->add_option("--grid,--eps-grid", sf.grid, "Comma list or log:<lo>:<hi>:<count>");
  sweep->add_option("--update-scale", sf.update_scale,
                    "half-sigma-min, half-sigma-max, twice-sigma-min, "
                    "twice-sigma-max, hundred-sigma-min or explicit:<lambda>");
  sweep->add_option("--eps-fixed", sf.eps_fixed, "eps1 = eps2 for alpha/beta sweeps");
  sweep->add_option("--regime", sf.regime, "auto, small-update, large-update");
  sweep->add_flag("--paper-scale", sf.paper_scale, "n=1000, k=20, 100 trials");
  sweep->add_option("--out", out_dir, "Output directory (created if missing)");
  sweep->add_option("--threads", threads, "Worker cap (0 = all cores)");

  int which = 0;
  std::string scale_text = "desk";
  unsigned long long figure_seed = 0;
  auto* figure = app.add_subcommand("figure", "Run both panels of a figure preset");
  figure->add_option("which", which, "1, 2, 3 or 4")->required()->check(CLI::Range(1, 4));
  figure->add_option("--scale", scale_text, "desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  figure->add_option("--seed", figure_seed, "Base seed");
  figure->add_option("--out", out_dir, "Output directory (created if missing)");
  figure->add_option("--threads", threads, "Worker cap (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*verify) return run_verify(verify_scope, verify_seed, threads);
    const smw::RunOptions run{threads};
    if (*sweep) {
      const smw::ExperimentConfig cfg = resolve_sweep_config(sf);
      emit(smw::run_sweep(cfg, run), out_dir);
      return exit_ok;
    }
    for (const auto& cfg : smw::figure_configs(which, smw::parse_scale(scale_text), figure_seed))
      emit(smw::run_sweep(cfg, run), out_dir);
    return exit_ok;
  } catch (const smw::IoError& e) {
    std::cerr << "smw: I/O error: " << e.what() << "\n";
    return exit_io;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "smw: I/O error: " << e.what() << "\n";
    return exit_io;
  } catch (const std::invalid_argument& e) {
    std::cerr << "smw: " << e.what() << "\n";
    return exit_usage;
  } catch (const smw::NumericalError& e) {
    std::cerr << "smw: numerical failure: " << e.what() << "\n";
    return exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "smw: " << e.what() << "\n";
    return exit_numerical;
  }
}
