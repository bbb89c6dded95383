#include <gtest/gtest.h>

#include "factorial/estimation.hpp"
#include "support.hpp"

using namespace factorial;
using factorial::testing::n8_example;

TEST(Moments, N8Example) {
  const auto m = moment_estimates(n8_example());
  EXPECT_EQ(m.y_hat, (Eigen::Vector4d(2, 3, 6, 8)));
  EXPECT_EQ(Eigen::VectorXd(m.v_hat.diagonal()), (Eigen::Vector4d(1, 1, 1, 4)));
  EXPECT_EQ((m.v_hat - Eigen::MatrixXd(m.v_hat.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Moments, ConstantOutcomesGiveZeroVariance) {
  const AssignmentTable d(FactorSpec({"A"}), {0, 0, 1, 1}, {3, 3, 3, 3});
  EXPECT_EQ(moment_estimates(d).v_hat.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Moments, DuplicatingUnits) {
  const auto d = n8_example();
  std::vector<std::size_t> cells = d.cells();
  std::vector<double> y = d.outcomes();
  cells.insert(cells.end(), d.cells().begin(), d.cells().end());
  y.insert(y.end(), d.outcomes().begin(), d.outcomes().end());
  const auto doubled = moment_estimates(AssignmentTable(d.spec(), cells, y));
  const auto base = moment_estimates(d);
  // S_hat(z,z) becomes S (n-1) / (2n-1) * 2 with n = 2, and N_z doubles.
  for (Eigen::Index z = 0; z < 4; ++z) {
    const double s = base.v_hat(z, z) * 2.0;
    const double s2 = s * (2.0 - 1.0) * 2.0 / (4.0 - 1.0);
    EXPECT_NEAR(doubled.v_hat(z, z), s2 / 4.0, 1e-14);
    EXPECT_LT(doubled.v_hat(z, z), base.v_hat(z, z));
  }
}

TEST(Inference, N8EqualScheme) {
  const auto r = effect_estimates(n8_example(), equal_scheme(2));
  EXPECT_TRUE(r.estimate.isApprox(Eigen::Vector3d(4.5, 1.5, 1.0), 1e-15));
  // G V G' with V = diag(1,1,1,4), G rows (-.5,-.5,.5,.5), (-.5,.5,-.5,.5), (1,-1,-1,1)
  Eigen::Matrix3d expected;
  expected << 1.75, 0.75, 1.5, 0.75, 1.75, 1.5, 1.5, 1.5, 7.0;
  EXPECT_TRUE(r.covariance.isApprox(expected, 1e-14));
  EXPECT_NEAR(r.critical_value, 1.959963984540054, 1e-12);
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(r.ci_high[j] - r.estimate[j], 1.959963984540054 * r.se[j], 1e-12);
    EXPECT_NEAR(r.z[j], r.estimate[j] / std::sqrt(expected(j, j)), 1e-12);
  }
}

TEST(Inference, BaselineScheme) {
  const auto d = factorial::testing::random_data(2, 21);
  const auto m = moment_estimates(d);
  const auto r = effect_estimates(d, product_scheme(ShiftVector({0.0, 0.0})));
  EXPECT_NEAR(r.estimate[0], m.y_hat[2] - m.y_hat[0], 1e-13);
  EXPECT_NEAR(r.estimate[1], m.y_hat[1] - m.y_hat[0], 1e-13);
}

TEST(Inference, RejectsBadInput) {
  EXPECT_FACTORIAL_ERROR(effect_estimates(n8_example(), equal_scheme(3)), ErrorCode::DimensionMismatch);
  EXPECT_FACTORIAL_ERROR(effect_estimates(n8_example(), equal_scheme(2), 1.5), ErrorCode::InvalidArgument);
}

TEST(Wald, DiagonalCovariance) {
  const Eigen::Vector3d est(1.0, -2.0, 0.5);
  const Eigen::Matrix3d cov = Eigen::Vector3d(1.0, 4.0, 0.25).asDiagonal();
  const auto t = wald_joint_test(est, cov, {0, 1, 2});
  EXPECT_NEAR(t.statistic, 1.0 + 1.0 + 1.0, 1e-12);
  EXPECT_EQ(t.df, 3);
  // chi-square(3) upper tail at 3: oracle from the closed form for odd df
  const double x = 3.0;
  const double tail = std::erfc(std::sqrt(x / 2.0)) + std::sqrt(2.0 * x / M_PI) * std::exp(-x / 2.0);
  EXPECT_NEAR(t.p_value, tail, 1e-12);
}

TEST(Wald, SingularCovarianceUsesRank) {
  Eigen::Matrix2d cov;
  cov << 1.0, 1.0, 1.0, 1.0;
  const auto t = wald_joint_test(Eigen::Vector2d(1.0, 1.0), cov, {0, 1});
  EXPECT_EQ(t.df, 1);
  EXPECT_NEAR(t.statistic, 1.0, 1e-12);  // (1,1) = sqrt2 v, eigenvalue 2 -> 2/2
}

TEST(Wald, ReportJointTests) {
  const auto r = effect_estimates(n8_example(), equal_scheme(2), 0.05,
                                  {{SubsetIndex(0b01), SubsetIndex(0b10)}, {SubsetIndex(0b11)}});
  ASSERT_EQ(r.joint_tests.size(), 2U);
  EXPECT_EQ(r.joint_tests[1].df, 1);
  EXPECT_NEAR(r.joint_tests[1].statistic, 1.0 / 7.0, 1e-12);
}

TEST(TreatmentBased, N8Example) {
  const auto f = treatment_based_fit(n8_example());
  EXPECT_TRUE(f.coefficients.isApprox(Eigen::Vector4d(2, 3, 6, 8), 1e-14));
  const auto m = moment_estimates(n8_example());
  EXPECT_TRUE(f.robust_cov.isApprox(0.5 * m.v_hat, 1e-14));
}

TEST(TreatmentBased, ConstantOutcomes) {
  const AssignmentTable d(FactorSpec({"A"}), {0, 0, 1, 1}, {3, 3, 3, 3});
  EXPECT_LT(treatment_based_fit(d).robust_cov.cwiseAbs().maxCoeff(), 1e-28);
}
