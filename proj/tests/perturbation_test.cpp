#include <gtest/gtest.h>

#include <limits>

#include "smw/perturbation.hpp"

using namespace smw;

TEST(GaussianWithNorm, ZeroTarget) {
  EXPECT_EQ(gaussian_with_norm(3, 4, 0.0, 9), Matrix::Zero(3, 4));
}

TEST(GaussianWithNorm, ExactNormAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 25; ++seed)
    EXPECT_NEAR(two_norm(gaussian_with_norm(6, 4, 3.5, seed)), 3.5, 3.5e-12) << seed;
}

TEST(GaussianWithNorm, ScalesLinearly) {
  const Matrix a = gaussian_with_norm(5, 5, 0.25, 4), b = gaussian_with_norm(5, 5, 0.5, 4);
  EXPECT_EQ(b, 2.0 * a);
}

TEST(GaussianWithNorm, RejectsNegativeTarget) {
  EXPECT_THROW(gaussian_with_norm(2, 2, -1.0, 0), InvalidInputError);
}

TEST(UpdatePair, UnitLambda) {
  const auto [u, v] = make_update_pair(20, 3, 1.0, 5);
  EXPECT_NEAR(two_norm(u), 1.0, 1e-12);
  EXPECT_NEAR(two_norm(v), 1.0, 1e-12);
  EXPECT_NE(u, v);
}

TEST(UpdatePair, LambdaFour) {
  const auto [u, v] = make_update_pair(20, 3, 4.0, 6);
  EXPECT_NEAR(two_norm(u), 2.0, 2e-12);
  EXPECT_NEAR(two_norm(v), 2.0, 2e-12);
}

TEST(UpdatePair, ProductOfNormsIsLambda) {
  for (double lambda : {1e-3, 1.0, 1e3}) {
    const auto [u, v] = make_update_pair(15, 4, lambda, 7);
    EXPECT_NEAR(two_norm(u) * two_norm(v), lambda, 1e-10 * lambda) << lambda;
  }
  EXPECT_THROW(make_update_pair(3, 4, 1.0, 0), DimensionError);
  EXPECT_THROW(make_update_pair(3, 1, 0.0, 0), InvalidInputError);
}

class PerturbInstance : public ::testing::Test {
 protected:
  Matrix a = gaussian_matrix(12, 12, 1) + 6.0 * identity(12);
  Matrix u = gaussian_matrix(12, 3, 2);
  Matrix v = gaussian_matrix(12, 3, 3);
};

TEST_F(PerturbInstance, ZeroNoiseIsExact) {
  const ProblemInstance inst = perturb_instance(a, u, v, {0.0, 0.0, 11});
  EXPECT_EQ(inst.a_inv_approx(), inst.a_inv_exact());
  const Matrix c_inv = invert(capacitance(inst.a_inv_exact(), u, v));
  EXPECT_LE(two_norm(inst.z_inv() - c_inv), 1e-12 * two_norm(c_inv));
}

TEST_F(PerturbInstance, ErrorNormsHoldWithEquality) {
  for (double eps : {1e-10, 1e-6, 1e-2}) {
    const ProblemInstance inst = perturb_instance(a, u, v, {eps, 0.5 * eps, 13});
    // Recovering E from (X + E) - X costs about ||X|| u in absolute terms.
    const double cancel = 64.0 * std::numeric_limits<double>::epsilon() * two_norm(inst.a_inv_exact());
    EXPECT_NEAR(two_norm(inst.a_inv_approx() - inst.a_inv_exact()), eps, 1e-12 * eps + cancel);
    // E2 perturbs the inverse of the perturbed capacitance.
    const Matrix c_tilde_inv = invert(capacitance(inst.a_inv_approx(), u, v));
    // Two inversions of the same C agree only to about kappa(C) u ||C^-1||.
    const double reinvert = 64.0 * std::numeric_limits<double>::epsilon() *
                            condition_number(c_tilde_inv) * two_norm(c_tilde_inv);
    EXPECT_NEAR(two_norm(inst.z_inv() - c_tilde_inv), 0.5 * eps, 1e-10 * eps + reinvert);
  }
}

TEST_F(PerturbInstance, DeterministicEndToEnd) {
  const PerturbationSpec spec{1e-3, 1e-3, 21};
  const double first = forward_error(perturb_instance(a, u, v, spec));
  const double second = forward_error(perturb_instance(a, u, v, spec));
  EXPECT_EQ(first, second);

  // Recompute from scratch with the same substream seeds.
  const Matrix a_inv = invert(a);
  const Matrix at = a_inv + gaussian_with_norm(12, 12, 1e-3, 21 ^ stream::e1);
  const Matrix z = invert(capacitance(at, u, v)) + gaussian_with_norm(3, 3, 1e-3, 21 ^ stream::e2);
  const Matrix b_tilde_inv = smw_inverse_approx(at, u, v, z);
  EXPECT_EQ(two_norm(b_tilde_inv - smw_inverse_exact(a_inv, u, v)), first);
}

TEST_F(PerturbInstance, SubstreamsDiffer) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PerturbationDirections d = perturbation_directions(3, 3, seed);
    EXPECT_NE(d.e1.g, d.e2.g) << seed;
  }
}

TEST_F(PerturbInstance, RejectsNegativeEps) {
  EXPECT_THROW(perturb_instance(a, u, v, {-1.0, 0.0, 0}), InvalidInputError);
}

TEST(MatrixSide, PerturbsMatrixByExactNorm) {
  const Matrix a = gaussian_matrix(8, 8, 4) + 5.0 * identity(8);
  const Matrix u = gaussian_matrix(8, 2, 5), v = gaussian_matrix(8, 2, 6);
  const MatrixSidePerturbation m = perturb_matrix_side(a, u, v, {1e-5, 2e-5, 3});
  EXPECT_NEAR(two_norm(m.a_tilde - a), 1e-5,
              1e-12 * 1e-5 + 64.0 * std::numeric_limits<double>::epsilon() * two_norm(a));
  const Matrix c_inv = invert(capacitance(m.a_tilde_inv, u, v));
  EXPECT_NEAR(two_norm(m.z_inv - c_inv), 2e-5, 1e-15);
}
