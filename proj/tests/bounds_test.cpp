#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "smw/bounds.hpp"
#include "smw/perturbation.hpp"

using namespace smw;

namespace {

double term_sum(const BoundReport& r) {
  double s = 0.0;
  for (const auto& t : r.terms) s += t.value;
  return s;
}

BoundInputs forward_example() {
  BoundInputs in;
  in.eps1 = 1e-4;
  in.eps2 = 1e-4;
  in.lambda = 0.5;
  in.alpha = 2.0;
  in.norm_a_inv = 10.0;
  return in;
}

BoundInputs backward_example() {
  BoundInputs in;
  in.eps1 = 1e-6;
  in.eps2 = 1e-6;
  in.lambda = 1.0;
  in.beta = 3.0;
  in.norm_a = 10.0;
  return in;
}

}  // namespace

TEST(ForwardBound, ZeroNoiseIsZero) {
  BoundInputs in = forward_example();
  in.eps1 = in.eps2 = 0.0;
  EXPECT_EQ(forward_bound(in).value, 0.0);
}

TEST(ForwardBound, NoUpdateLeavesInverseError) {
  BoundInputs in = forward_example();
  in.lambda = 0.0;
  EXPECT_EQ(forward_bound(in).value, in.eps1);
  EXPECT_TRUE(forward_bound(in).assumptions_hold());
}

TEST(ForwardBound, ReEvaluation) {
  const double e1 = 1e-4, e2 = 1e-4, l = 0.5, a = 2.0, n = 10.0;
  // Expanded by hand: e1 + e1 l a (2n + e1) + l (n + e1)^2 (e2 + 2 e1 l a^2).
  const double first = e1;
  const double second = e1 * l * a * 2.0 * n + e1 * l * a * e1;
  const double nn = n * n + 2.0 * n * e1 + e1 * e1;
  const double third = l * nn * e2 + l * nn * 2.0 * e1 * l * a * a;
  const double want = first + second + third;
  const BoundReport r = forward_bound(forward_example());
  EXPECT_NEAR(r.value, want, 1e-15 * want);
  EXPECT_NEAR(term_sum(r), r.value, 1e-12 * r.value);
  ASSERT_EQ(r.terms.size(), 3u);
  EXPECT_EQ(*r.term("inverse_error"), e1);
}

TEST(ForwardBound, AssumptionThresholdAndMargin) {
  BoundInputs in = forward_example();  // threshold 1/(2 * 0.5 * 2) = 0.5
  const AssumptionCheck& ok = forward_bound(in).assumptions.at(0);
  EXPECT_TRUE(ok.ok);
  EXPECT_DOUBLE_EQ(ok.margin, 0.5 - 1e-4);
  in.eps1 = 0.5;
  EXPECT_FALSE(forward_bound(in).assumptions_hold());
  EXPECT_GT(forward_bound(in).value, 0.0);  // still evaluated
  EXPECT_DOUBLE_EQ(forward_eps_threshold(0.5, 2.0), 0.5);
  EXPECT_DOUBLE_EQ(forward_alpha_threshold(0.5, 1e-4), 1e4);
}

TEST(ForwardBound, RejectsNonFinite) {
  BoundInputs in = forward_example();
  in.alpha = std::nan("");
  EXPECT_THROW(forward_bound(in), InvalidInputError);
  in.alpha = infinity;
  EXPECT_THROW(forward_bound(in), InvalidInputError);
}

TEST(ForwardSimplified, Substitution) {
  BoundInputs in;
  in.eps1 = 1e-6;
  in.eps2 = 1e-6;
  in.norm_a_inv = 100.0;
  in.lambda = 1e-3;
  EXPECT_NEAR(forward_bound_simplified(in).value, 2e-4 + 1.2e-5, 1e-18);
  EXPECT_TRUE(forward_bound_simplified(in).assumptions_hold());
  in.eps1 = in.eps2 = 0.0;
  EXPECT_EQ(forward_bound_simplified(in).value, 0.0);
  in.lambda = 0.5;  // sigma_min(A) = 0.01, so lambda exceeds half of it
  EXPECT_FALSE(forward_bound_simplified(in).assumptions_hold());
}

TEST(ForwardAlphaLarge, SubstitutionAndScaling) {
  BoundInputs in;
  in.eps1 = in.eps2 = 1e-3;
  in.lambda = 2.0;
  in.norm_a_inv = 1.0;
  in.alpha = 10.0;
  EXPECT_NEAR(forward_bound_alpha_large(in).value, 6.4, 1e-14);
  const double base = forward_bound_alpha_large(in).value;
  in.alpha = 20.0;
  EXPECT_NEAR(forward_bound_alpha_large(in).value, 4.0 * base, 1e-13);
  in.eps1 = in.eps2 = 0.0;
  EXPECT_EQ(forward_bound_alpha_large(in).value, 0.0);
}

TEST(ForwardKappaV, SubstitutionIdentity) {
  BoundInputs in = forward_example();
  in.kappa_v = 4.0;
  in.norm_binv_a = 0.75;  // product 3
  BoundInputs direct = in;
  direct.alpha = 3.0;
  EXPECT_EQ(forward_bound_kappa_v(in).value, forward_bound(direct).value);
  in.eps1 = in.eps2 = 0.0;
  EXPECT_EQ(forward_bound_kappa_v(in).value, 0.0);
}

TEST(ForwardKappaV, DominatesAlphaOnSeededInstance) {
  const Matrix a = gaussian_matrix(15, 15, 3) + 4.0 * identity(15);
  const Matrix u = gaussian_matrix(15, 3, 4), v = gaussian_matrix(15, 3, 5);
  const BoundInputs in = measure_inputs(a, u, v, {1e-6, 1e-6, 0});
  EXPECT_GE(in.kappa_v * in.norm_binv_a, in.alpha);
  EXPECT_GE(in.kappa_v * in.norm_ainv_b, in.beta);
  EXPECT_LE(forward_bound(in).value, forward_bound_kappa_v(in).value);
  EXPECT_LE(backward_bound(in).value, backward_bound_kappa_v(in).value);
}

TEST(BackwardBound, ZeroAndNoUpdate) {
  BoundInputs in = backward_example();
  in.eps1 = in.eps2 = 0.0;
  EXPECT_EQ(backward_bound(in).value, 0.0);
  in = backward_example();
  in.lambda = 0.0;
  EXPECT_EQ(backward_bound(in).value, 2.0 * 1e-6 * 100.0);
}

TEST(BackwardBound, ReEvaluation) {
  const double want = 2e-4 + 4.0 * 1e-6 * (3.0 + 1e-6) * (3.0 + 1e-6);
  const BoundReport r = backward_bound(backward_example());
  EXPECT_NEAR(r.value, want, 1e-15 * want);
  EXPECT_NEAR(term_sum(r), r.value, 1e-12 * r.value);
  EXPECT_TRUE(r.assumptions_hold());
}

TEST(BackwardBound, EachAssumptionCanFail) {
  BoundInputs in = backward_example();
  in.eps1 = 0.06;  // 1/(2 ||A||) = 0.05
  EXPECT_FALSE(backward_bound(in).assumptions.at(0).ok);
  in = backward_example();
  in.eps2 = 0.2;  // 1/(2 (3 + 1e-6)) ~ 0.1667
  EXPECT_FALSE(backward_bound(in).assumptions.at(1).ok);
  in = backward_example();
  in.eps2 = 0.03;  // 2 * 9 * 0.03 = 0.54 > 0.5 while eps2 check still passes
  EXPECT_TRUE(backward_bound(in).assumptions.at(1).ok);
  EXPECT_FALSE(backward_bound(in).assumptions.at(2).ok);
  in = backward_example();
  in.a_tilde_invertibility_margin = -1.0;
  EXPECT_FALSE(backward_bound(in).assumptions_hold());
}

TEST(BackwardSimplified, Substitution) {
  BoundInputs in;
  in.eps1 = 0.0;
  in.eps2 = 1e-5;
  EXPECT_NEAR(backward_bound_simplified(in).value, 8e-5, 1e-20);
  in.eps2 = 0.0;
  EXPECT_EQ(backward_bound_simplified(in).value, 0.0);
}

TEST(BackwardBetaLarge, SubstitutionAndScaling) {
  BoundInputs in;
  in.lambda = 2.0;
  in.eps1 = in.eps2 = 1e-6;
  in.beta = 100.0;
  EXPECT_NEAR(backward_bound_beta_large(in).value, 0.36, 1e-14);
  in.beta = 200.0;
  EXPECT_NEAR(backward_bound_beta_large(in).value, 1.44, 1e-13);
  in.eps1 = in.eps2 = 0.0;
  EXPECT_EQ(backward_bound_beta_large(in).value, 0.0);
}

TEST(BackwardKappaV, SubstitutionIdentity) {
  BoundInputs in = backward_example();
  in.kappa_v = 2.0;
  in.norm_ainv_b = 2.5;
  BoundInputs direct = in;
  direct.beta = 5.0;
  EXPECT_EQ(backward_bound_kappa_v(in).value, backward_bound(direct).value);
}

TEST(BackwardThresholds, SolveAtEquality) {
  const double beta = 3.0, lambda = 2.0;
  const double e = backward_eps2_threshold(beta, lambda);
  EXPECT_NEAR(e * (beta + lambda * e), 0.5, 1e-14);
  const double p = backward_product_threshold(beta, lambda);
  EXPECT_NEAR(2.0 * (beta + lambda * p) * (beta + lambda * p) * p, 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(backward_eps1_threshold(10.0), 0.05);
  EXPECT_NEAR(backward_beta_threshold_eps2(1e-6, 1e-6, 1.0), 5e5 - 1e-6, 1e-9);
  EXPECT_NEAR(backward_beta_threshold_product(1e-6, 1e-6, 1.0), 500.0 - 1e-6, 1e-9);
}

TEST(Monotonicity, NondecreasingInBothEps) {
  for (double e1 : {0.0, 1e-8, 1e-5, 1e-2})
    for (double e2 : {0.0, 1e-8, 1e-5, 1e-2}) {
      BoundInputs lo = forward_example();
      lo.eps1 = e1;
      lo.eps2 = e2;
      lo.norm_a = 10.0;
      BoundInputs hi1 = lo, hi2 = lo;
      hi1.eps1 = 2.0 * e1 + 1e-9;
      hi2.eps2 = 2.0 * e2 + 1e-9;
      EXPECT_LE(forward_bound(lo).value, forward_bound(hi1).value);
      EXPECT_LE(forward_bound(lo).value, forward_bound(hi2).value);
      EXPECT_LE(backward_bound(lo).value, backward_bound(hi1).value);
      EXPECT_LE(backward_bound(lo).value, backward_bound(hi2).value);
    }
}

TEST(MeasureInputs, UnitVectorCapacitance) {
  Matrix e = Matrix::Zero(4, 1);
  e(0, 0) = 1.0;
  const BoundInputs in = measure_inputs(identity(4), e, e, {});
  EXPECT_DOUBLE_EQ(in.alpha, 0.5);
  EXPECT_DOUBLE_EQ(in.beta, 2.0);
  EXPECT_DOUBLE_EQ(in.lambda, 1.0);
}

TEST(MeasureInputs, ZeroUpdate) {
  const BoundInputs in =
      measure_inputs(gaussian_matrix(5, 5, 1) + 3.0 * identity(5), Matrix::Zero(5, 2),
                     gaussian_matrix(5, 2, 2), {});
  EXPECT_DOUBLE_EQ(in.alpha, 1.0);
  EXPECT_DOUBLE_EQ(in.beta, 1.0);
  EXPECT_EQ(in.lambda, 0.0);
}

TEST(MeasureInputs, AgainstNaiveCapacitance) {
  const Matrix a = gaussian_matrix(6, 6, 7) + 3.0 * identity(6);
  const Matrix u = gaussian_matrix(6, 2, 8), v = gaussian_matrix(6, 2, 9);
  oracle::Mat c = oracle::matmul(oracle::matmul(oracle::transpose(v), invert(a)), u);
  c(0, 0) += 1.0;
  c(1, 1) += 1.0;
  const std::vector<double> s = oracle::singular_values(c);
  const BoundInputs in = measure_inputs(a, u, v, {});
  EXPECT_NEAR(in.alpha * s.back(), 1.0, 1e-12);
  EXPECT_NEAR(in.beta, s.front(), 1e-12 * s.front());
}

TEST(MeasureInputs, SingularCapacitanceGivesInfiniteAlpha) {
  Matrix e = Matrix::Zero(3, 1);
  e(0, 0) = 1.0;
  const BoundInputs in = measure_inputs(identity(3), -e, e, {});
  EXPECT_EQ(in.alpha, infinity);
  EXPECT_THROW(forward_bound(in), InvalidInputError);
}

TEST(Lemma1, ScalarTightness) {
  // M = (c/2) I, N = c I with c = 1: rho = 1, eps = 1/2.
  const Lemma1Bound b = lemma1_bound(1.0, 0.5);
  const double actual = std::abs(1.0 / 0.5 - 1.0);
  EXPECT_DOUBLE_EQ(b.difference, 1.0);
  EXPECT_NEAR(actual / b.difference, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(b.inverse_norm, 2.0);
  // The boundary eps = 1/(2 rho) counts as admissible.
  EXPECT_TRUE(b.assumptions.at(1).ok);
}

TEST(Lemma1, RankOneTightness) {
  const Matrix n_mat = gaussian_matrix(6, 6, 12);
  const SvdFactors f = svd(n_mat);
  const double sn = f.singulars(5);
  const Matrix m = n_mat + 0.5 * sn * f.left.col(5) * f.right.col(5).transpose();
  const double actual = two_norm(invert(m) - invert(n_mat));
  const Lemma1Bound b = lemma1_bound(1.0 / sn, 0.5 * sn);
  EXPECT_NEAR(actual / b.difference, 1.0 / 3.0, 1e-10);
  EXPECT_LE(two_norm(invert(m)), b.inverse_norm);
}

TEST(Lemma1, ZeroEps) {
  EXPECT_EQ(lemma1_bound(3.0, 0.0).difference, 0.0);
  EXPECT_FALSE(lemma1_bound(3.0, 0.2).admissible());
  EXPECT_TRUE(lemma1_bound(3.0, 1.0 / 6.0).admissible());
}

TEST(ImprovedBound, Substitution) {
  GhadiriBoundInputs in;
  in.rho = 1.0;
  in.gamma = 1.0;
  in.eps2 = 1e-6;
  in.eps1 = 2e-7;
  const BoundReport r = ghadiri_two_norm_bound(in);
  EXPECT_NEAR(*r.detail("intermediate"), 5.12e-4, 1e-17);
  EXPECT_NEAR(r.value, 512e-6 + 2e-7, 1e-18);
  in.eps1 = in.eps2 = 0.0;
  EXPECT_EQ(ghadiri_two_norm_bound(in).value, 0.0);
}

TEST(ImprovedBound, ThresholdFlags) {
  GhadiriBoundInputs in;
  in.rho = 2.0;
  in.gamma = 1.0;
  in.eps2 = 1.0 / (512.0 * 128.0);
  EXPECT_TRUE(ghadiri_two_norm_bound(in).assumptions.at(2).ok);
  in.eps2 *= 1.0001;
  EXPECT_FALSE(ghadiri_two_norm_bound(in).assumptions.at(2).ok);
  in.gamma = 3.0;
  EXPECT_FALSE(ghadiri_two_norm_bound(in).assumption("gamma <= rho")->ok);
}

TEST(ImprovedBound, DominatesOnSeededInstances) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Index n = 10;
    const Matrix a = identity(n) + 0.25 * gaussian_with_norm(n, n, 1.0, seed);
    const Matrix u = gaussian_with_norm(n, 2, 0.25, seed + 100);
    const Matrix v = gaussian_with_norm(n, 2, 0.25, seed + 200);
    const GhadiriBoundInputs probe = measure_ghadiri_inputs(a, u, v, 0.0, 0.0);
    const double rho7 = std::pow(probe.rho, 7);
    const double eps2 = 0.5 / (512.0 * rho7);
    const MatrixSidePerturbation p = perturb_matrix_side(a, u, v, {1e-8, eps2, seed});
    const Matrix b_tilde_inv = smw_inverse_approx(p.a_tilde_inv, u, v, p.z_inv);
    const double actual = two_norm(invert(b_tilde_inv) - (a + u * v.transpose()));
    const BoundReport r = ghadiri_two_norm_bound(measure_ghadiri_inputs(a, u, v, 1e-8, eps2));
    EXPECT_TRUE(r.assumptions.at(2).ok);
    EXPECT_LE(actual, r.value) << seed;
  }
}

TEST(Yip, UnitVectorIsPerfectlyConditioned) {
  Matrix e = Matrix::Zero(4, 1);
  e(0, 0) = 0.5;
  const BoundReport r = yip_capacitance_diagnostics(identity(4), e, e);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_LE(r.value, *r.detail("general_bound"));
  EXPECT_LE(r.value, *r.detail("structured_bound"));
  EXPECT_TRUE(r.assumptions_hold());
}

TEST(Yip, GeneralBoundOnGaussian) {
  const Matrix a = gaussian_matrix(12, 12, 30) + 2.0 * identity(12);
  const BoundReport r =
      yip_capacitance_diagnostics(a, gaussian_matrix(12, 3, 31), gaussian_matrix(12, 3, 32));
  EXPECT_LE(r.value, *r.detail("general_bound"));
  EXPECT_FALSE(r.assumptions_hold());  // dense update has no zero rows
}
