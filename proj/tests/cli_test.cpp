#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include "smw/experiments.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

/// Runs the CLI with the given argument string; captures stdout (and stderr
/// when merge is set).
CliRun run_cli(const std::string& args, bool merge = false) {
  const std::string cmd = std::string(SMW_CLI_PATH) + " " + args + (merge ? " 2>&1" : " 2>/dev/null");
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("smw_cli_test_" + name);
  fs::remove_all(d);
  return d;
}

std::string value_of(const std::string& out, const std::string& key) {
  const auto pos = out.find(key + "=");
  if (pos == std::string::npos) return {};
  const auto end = out.find('\n', pos);
  return out.substr(pos + key.size() + 1, end - pos - key.size() - 1);
}

}  // namespace

TEST(CliUsage, ExitCodes) {
  EXPECT_EQ(run_cli("").code, 2);
  EXPECT_EQ(run_cli("--help").code, 0);
  EXPECT_EQ(run_cli("verify bogus").code, 2);
  EXPECT_EQ(run_cli("figure 5").code, 2);
  EXPECT_EQ(run_cli("figure 1 --scale huge").code, 2);
  EXPECT_EQ(run_cli("sweep --family sideways").code, 2);
  EXPECT_EQ(run_cli("sweep --config /nonexistent/x.cfg").code, 4);
}

TEST(CliVerify, Lemma1ReportsTightnessRatios) {
  const CliRun r = run_cli("verify lemma1", true);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("result=pass"), std::string::npos);
  EXPECT_NE(r.out.find("ratio(c=1) = 1.000000000000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("ratio = 0.333333333333"), std::string::npos) << r.out;
}

TEST(CliVerify, IdentitiesPass) {
  const CliRun r = run_cli("verify identities");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("result=pass"), std::string::npos);
  EXPECT_EQ(r.out.find("status=fail"), std::string::npos);
}

TEST(CliSweep, CreatesDirectoryAndRegeneratesByteIdentical) {
  const fs::path dir = fresh_dir("sweep") / "nested";
  const CliRun r = run_cli("sweep --family backward-eps --n 30 --k 3 --trials 3 --seed 5 "
                        "--eps-grid 1e-8,1e-5,1e-2 --out " + dir.string());
  ASSERT_EQ(r.code, 0);
  const std::string csv = value_of(r.out, "csv");
  const std::string cfg = value_of(r.out, "config");
  ASSERT_TRUE(fs::exists(csv)) << r.out;
  ASSERT_TRUE(fs::exists(cfg));
  EXPECT_EQ(fs::path(csv).filename(), "backward-eps_half-sigma-min_30x3.csv");
  const std::string original = smw::read_text_file(csv);

  // Feed the CSV itself back as the config.
  const fs::path again = fresh_dir("sweep_again");
  const CliRun r2 = run_cli("sweep --config " + csv + " --threads 1 --out " + again.string());
  ASSERT_EQ(r2.code, 0);
  EXPECT_EQ(smw::read_text_file(value_of(r2.out, "csv")), original);

  // The .cfg file reproduces it too.
  const fs::path third = fresh_dir("sweep_cfg");
  const CliRun r3 = run_cli("sweep --config " + cfg + " --out " + third.string());
  ASSERT_EQ(r3.code, 0);
  EXPECT_EQ(smw::read_text_file(value_of(r3.out, "csv")), original);
}

TEST(CliSweep, FlagsOverrideConfigFile) {
  const fs::path dir = fresh_dir("override");
  fs::create_directories(dir);
  smw::write_text_file((dir / "in.cfg").string(), "family=forward-eps\nn=40\nk=2\ntrials=2\ngrid=1e-6\n");
  const CliRun r = run_cli("sweep --config " + (dir / "in.cfg").string() + " --n 24 --out " + dir.string());
  ASSERT_EQ(r.code, 0);
  const smw::ParsedCsv p = smw::parse_csv_file(value_of(r.out, "csv"));
  const smw::ExperimentConfig c = smw::config_from_key_values(p.config);
  EXPECT_EQ(c.n, 24);
  EXPECT_EQ(c.k, 2);
}

TEST(CliSweep, BackwardBetaRowsKeyedByBeta) {
  const fs::path dir = fresh_dir("beta");
  const CliRun r = run_cli("sweep --family backward-beta --update-scale hundred-sigma-min --n 40 --k 4 "
                        "--trials 2 --out " + dir.string());
  ASSERT_EQ(r.code, 0);
  const smw::ParsedCsv p = smw::parse_csv_file(value_of(r.out, "csv"));
  ASSERT_EQ(p.rows.size(), smw::sweep_offsets(40, 4).size());
  for (const auto& row : p.rows) EXPECT_GE(row.sweep_value, 1.0);  // beta = ||I + S||
}

TEST(CliSweep, UnwritableOutputIsIoError) {
  const fs::path dir = fresh_dir("blocked");
  fs::create_directories(dir);
  smw::write_text_file((dir / "file").string(), "x");
  // A regular file where a directory component is expected.
  const CliRun r = run_cli("sweep --n 20 --k 2 --trials 1 --grid 1e-6 --out " + (dir / "file" / "sub").string());
  EXPECT_EQ(r.code, 4);
}

TEST(CliFigure, FigureOneEmitsTwoPanels) {
  const fs::path dir = fresh_dir("fig1");
  const CliRun r = run_cli("figure 1 --out " + dir.string());
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir / "forward-eps_half-sigma-min_200x10.csv"));
  EXPECT_TRUE(fs::exists(dir / "forward-eps_half-sigma-max_200x10.csv"));
}

TEST(CliFigure, FigureFourSmallPanelSatisfiesAllAssumptions) {
  const fs::path dir = fresh_dir("fig4");
  const CliRun r = run_cli("figure 4 --out " + dir.string());
  ASSERT_EQ(r.code, 0);
  const smw::ParsedCsv p =
      smw::parse_csv_file((dir / "backward-beta_hundred-sigma-min_200x10.csv").string());
  ASSERT_FALSE(p.rows.empty());
  for (const auto& row : p.rows) EXPECT_EQ(row.assumptions_ok_fraction, 1.0) << row.sweep_value;
}
