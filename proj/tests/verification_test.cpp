#include <gtest/gtest.h>

#include "smw/verification.hpp"

using namespace smw;

namespace {

void expect_all_pass(const SuiteReport& s) {
  for (const auto& c : s.checks)
    EXPECT_TRUE(c.passed()) << s.name << ": " << c.name << " checked=" << c.checked
                            << " failed=" << c.failed << " " << c.note;
}

}  // namespace

TEST(CheckResultTest, MarginsAndMinimum) {
  CheckResult c = detail::make_check("x", 2);
  c.record(0.5, 1.0);
  EXPECT_FALSE(c.passed());  // below its minimum count
  c.record(0.9, 1.0);
  EXPECT_TRUE(c.passed());
  EXPECT_NEAR(c.worst_margin, 0.1, 1e-15);
  c.record(2.0, 1.0);
  EXPECT_EQ(c.failed, 1);
  EXPECT_FALSE(c.passed());
}

TEST(Suites, Identities) {
  const SuiteReport s = verify_identities();
  expect_all_pass(s);
  EXPECT_EQ(s.find(check::smw_exact)->checked, 100);
}

TEST(Suites, Lemma1) {
  const SuiteReport s = verify_lemma1();
  expect_all_pass(s);
  EXPECT_GE(s.find(check::lemma1_validity)->checked, 1000);
}

TEST(Suites, Constructions) { expect_all_pass(verify_constructions()); }

TEST(Suites, BoundsReducedCounts) {
  VerifyOptions opt;
  opt.bound_instances = 200;
  opt.improved_instances = 10;
  opt.seed = 3;
  expect_all_pass(verify_bounds(opt));
}

TEST(Suites, LemmaTightnessRatios) {
  EXPECT_NEAR(lemma1_scalar_ratio(1.0, 3), 1.0, 1e-12);
  EXPECT_NEAR(lemma1_rank_one_ratio(gaussian_matrix(5, 5, 8)), 1.0 / 3.0, 1e-10);
}

TEST(Scope, ParseAndTable) {
  EXPECT_EQ(parse_verify_scope("lemma1"), VerifyScope::lemma1);
  EXPECT_THROW(parse_verify_scope("bogus"), InvalidInputError);
  const auto suites = run_verification(VerifyScope::constructions, {});
  ASSERT_EQ(suites.size(), 1u);
  const std::string table = format_verification_table(suites);
  EXPECT_NE(table.find(check::offsets), std::string::npos);
}
