#include <gtest/gtest.h>

#include "factorial/contrasts.hpp"
#include "factorial/estimation.hpp"
#include "factorial/identities.hpp"
#include "factorial/regression.hpp"
#include "support.hpp"

using namespace factorial;
using factorial::testing::n8_example;
using factorial::testing::naive_hc0;
using factorial::testing::normal_equations;
using factorial::testing::outcomes;
using factorial::testing::random_data;

TEST(Design, HalfShiftValues) {
  const auto d = build_design(n8_example(), ModelSpec::saturated(ShiftVector({0.5, 0.5})));
  ASSERT_EQ(d.full.cols(), 4);
  for (Eigen::Index i = 0; i < d.full.rows(); ++i) {
    EXPECT_EQ(d.full(i, 0), 1.0);
    EXPECT_EQ(std::abs(d.full(i, 1)), 0.5);
    EXPECT_EQ(std::abs(d.full(i, 2)), 0.5);
    EXPECT_EQ(std::abs(d.full(i, 3)), 0.25);
  }
}

TEST(Design, ZeroShiftIsDummyCoding) {
  const auto data = random_data(3, 5);
  const auto d = build_design(data, ModelSpec::saturated(ShiftVector::constant(3, 0.0)));
  const auto subsets = canonical_subsets(3);
  for (std::size_t i = 0; i < data.unit_count(); ++i) {
    for (std::size_t j = 0; j < subsets.size(); ++j) {
      double v = 1.0;
      for (int k : subsets[j].members()) v *= data.level(i, k);
      EXPECT_EQ(d.full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)), v);
    }
  }
}

TEST(Design, SignCodingScale) {
  const auto data = random_data(3, 6);
  const auto d = build_design(data, ModelSpec::saturated(ShiftVector::constant(3, 0.5)));
  const auto subsets = canonical_subsets(3);
  for (std::size_t i = 0; i < data.unit_count(); ++i) {
    for (std::size_t j = 0; j < subsets.size(); ++j) {
      double sign = 1.0;
      for (int k : subsets[j].members()) sign *= 2.0 * data.level(i, k) - 1.0;
      EXPECT_EQ(d.full(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)),
                std::ldexp(sign, -subsets[j].size()));
    }
  }
}

TEST(ModelSpec, Validation) {
  EXPECT_FACTORIAL_ERROR(ModelSpec(ShiftVector({0.5, 0.5}), {}), ErrorCode::InvalidArgument);
  EXPECT_FACTORIAL_ERROR(ModelSpec(ShiftVector({0.5, 0.5}), {SubsetIndex(0b100)}), ErrorCode::InvalidArgument);
  EXPECT_FACTORIAL_ERROR(ModelSpec(ShiftVector({0.5, 0.5}), {SubsetIndex(1), SubsetIndex(1)}),
                         ErrorCode::InvalidArgument);
  const ModelSpec m(ShiftVector({0.5, 0.5, 0.5}), {SubsetIndex(0b011), SubsetIndex(0b001)});
  EXPECT_EQ(m.terms().front().mask(), 0b001U);
  EXPECT_EQ(m.omitted_terms().size(), 5U);
  EXPECT_FALSE(m.is_saturated());
  EXPECT_TRUE(ModelSpec::saturated(ShiftVector({0.1})).is_saturated());
}

TEST(Ols, InterceptOnly) {
  const Eigen::VectorXd y = Eigen::Vector4d(1, 2, 4, 9);
  const auto f = ols_fit(Eigen::MatrixXd::Ones(4, 1), y);
  EXPECT_NEAR(f.coefficients[0], 4.0, 1e-14);
  EXPECT_NEAR(f.robust_cov_full(0, 0), (9.0 + 4.0 + 0.0 + 25.0) / 16.0, 1e-14);
}

TEST(Ols, MatchesNormalEquationsAndTextbookHc0) {
  SplitMix64 rng(8);
  Eigen::MatrixXd x(30, 4);
  Eigen::VectorXd y(30);
  for (Eigen::Index i = 0; i < 30; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < 4; ++j) x(i, j) = rng.uniform();
    y[i] = 2.0 * rng.uniform() - 1.0;
  }
  const auto f = ols_fit(x, y);
  EXPECT_TRUE(f.coefficients.isApprox(normal_equations(x, y), 1e-10));
  EXPECT_TRUE(f.robust_cov_full.isApprox(naive_hc0(x, y), 1e-9));
  EXPECT_TRUE(f.gram_inverse.isApprox((x.transpose() * x).inverse(), 1e-10));
  EXPECT_LT((x.transpose() * f.residuals).cwiseAbs().maxCoeff(), 1e-9 * y.norm());
  EXPECT_EQ(f.robust_cov_full, f.robust_cov_full.transpose());
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(f.robust_cov_full).eigenvalues().minCoeff(), -1e-15);
}

TEST(Ols, RankDeficient) {
  Eigen::MatrixXd x(5, 3);
  x << 1, 1, 1, 1, 2, 2, 1, 3, 3, 1, 4, 4, 1, 5, 5;
  EXPECT_FACTORIAL_ERROR(ols_fit(x, Eigen::VectorXd::Ones(5)), ErrorCode::RankDeficient);
  const AssignmentTable empty_cell(FactorSpec({"A", "B"}), {0, 0, 1, 1, 2, 2}, {1, 2, 3, 4, 5, 6});
  EXPECT_FACTORIAL_ERROR(saturated_fit(empty_cell, ShiftVector({0.5, 0.5})), ErrorCode::RankDeficient);
  // an unsaturated fit can still succeed
  EXPECT_NO_THROW(unsaturated_fit(empty_cell, ModelSpec(ShiftVector({0.5, 0.5}), {SubsetIndex(1), SubsetIndex(2)})));
}

TEST(Saturated, N8Example) {
  const auto s = saturated_fit(n8_example(), ShiftVector({0.5, 0.5}));
  EXPECT_TRUE(s.fit.terms().isApprox(Eigen::Vector3d(4.5, 1.5, 1.0), 1e-13));
  const auto d = build_design(n8_example(), ModelSpec::saturated(ShiftVector({0.5, 0.5})));
  EXPECT_TRUE(s.fit.coefficients.isApprox(normal_equations(d.full, outcomes(n8_example())), 1e-13));
  EXPECT_EQ(s.fit.labels, (std::vector<std::string>{"(Intercept)", "A", "B", "A:B"}));
  for (const auto& c : s.checks) EXPECT_TRUE(c.pass) << c.identity;
}

TEST(Saturated, TwoByTwoMatchesProductScheme) {
  SplitMix64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto data = random_data(2, 100 + rep);
    const ShiftVector delta(factorial::testing::random_delta(2, rng));
    const auto fit = saturated_fit(data, delta).fit;
    const std::vector<double> joint{(1 - delta[0]) * (1 - delta[1]), (1 - delta[0]) * delta[1],
                                    delta[0] * (1 - delta[1]), delta[0] * delta[1]};
    const auto g = factorial::testing::brute_force_contrasts(from_joint(2, joint, 1e-9));
    const Eigen::VectorXd tau = g * moment_estimates(data).y_hat;
    EXPECT_LT(max_rel_err(fit.terms(), tau, tau.cwiseAbs().maxCoeff()), 1e-10);
  }
}

TEST(Saturated, HcInvariantToColumnPermutation) {
  const auto data = random_data(3, 9);
  const auto d = build_design(data, ModelSpec::saturated(ShiftVector({0.2, 0.4, 0.9})));
  const auto base = ols_fit(d.full, outcomes(data));
  std::vector<int> perm{0, 7, 3, 5, 1, 6, 2, 4};
  Eigen::MatrixXd permuted(d.full.rows(), 8);
  for (int j = 0; j < 8; ++j) permuted.col(j) = d.full.col(perm[static_cast<std::size_t>(j)]);
  const auto pf = ols_fit(permuted, outcomes(data));
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      EXPECT_NEAR(pf.robust_cov_full(a, b),
                  base.robust_cov_full(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]),
                  1e-10 * base.robust_cov_full.cwiseAbs().maxCoeff());
    }
  }
}

TEST(Unsaturated, AdditiveCoefficientsIgnoreShift) {
  const auto data = random_data(2, 31);
  const std::vector<SubsetIndex> terms{SubsetIndex(1), SubsetIndex(2)};
  const auto a = unsaturated_fit(data, ModelSpec(ShiftVector({0.0, 0.0}), terms));
  const auto b = unsaturated_fit(data, ModelSpec(ShiftVector({0.7, 0.2}), terms));
  EXPECT_TRUE(a.terms().isApprox(b.terms(), 1e-12));
  EXPECT_FALSE(std::abs(a.coefficients[0] - b.coefficients[0]) < 1e-6);
}

TEST(Unsaturated, BalancedAdditiveEqualsStandardMainEffect) {
  const auto data = n8_example();
  const auto f = unsaturated_fit(data, ModelSpec(ShiftVector({0.5, 0.5}), {SubsetIndex(1), SubsetIndex(2)}));
  EXPECT_NEAR(f.terms()[0], 4.5, 1e-13);
  EXPECT_NEAR(f.terms()[1], 1.5, 1e-13);
}

TEST(Unsaturated, MainPlusTwoWayShape) {
  const auto data = random_data(3, 12);
  const auto f = unsaturated_fit(data, ModelSpec(ShiftVector::constant(3, 0.5), low_order_terms(3, 2)));
  EXPECT_EQ(f.terms().size(), 6);
}

TEST(OmittedAlgebra, BalancedHalfShiftHasZeroD) {
  const auto data = random_data(3, 13, 4, 4);
  const auto alg = omitted_algebra(build_design(data, ModelSpec(ShiftVector::constant(3, 0.5), low_order_terms(3, 1))));
  EXPECT_EQ(alg.d.rows(), 3);
  EXPECT_EQ(alg.d.cols(), 4);
  EXPECT_LT(alg.d.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(OmittedAlgebra, ResidualOrthogonalToIncluded) {
  const auto data = random_data(3, 14);
  const auto d = build_design(data, ModelSpec(ShiftVector({0.3, 0.5, 0.8}), low_order_terms(3, 1)));
  const auto alg = omitted_algebra(d);
  EXPECT_LT((d.included().transpose() * alg.residual_matrix).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(OmittedRelation, GenericUnbalanced) {
  const auto data = random_data(3, 15);
  const ModelSpec spec(ShiftVector({0.3, 0.6, 0.45}), low_order_terms(3, 1));
  const auto r = verify_omitted_relation(data, spec);
  EXPECT_TRUE(r.relation.pass) << r.relation.max_rel_err;
  EXPECT_TRUE(r.criterion.pass) << r.criterion.max_rel_err;
  EXPECT_GT(r.d_gamma_minus_norm, 1e-6);
  EXPECT_GT(r.criterion_norm, 1e-9);
  EXPECT_FALSE(r.orthogonal_raw);
}

TEST(OmittedRelation, ZeroOmittedCoefficients) {
  // outcomes exactly additive in the shifted main effects: gamma_minus = 0
  const auto base = random_data(2, 16);
  std::vector<double> y;
  for (std::size_t i = 0; i < base.unit_count(); ++i) y.push_back(1.0 + 2.0 * base.level(i, 0) - 3.0 * base.level(i, 1));
  const AssignmentTable data(base.spec(), base.cells(), y);
  const auto r = verify_omitted_relation(data, ModelSpec(ShiftVector({0.2, 0.9}), {SubsetIndex(1), SubsetIndex(2)}));
  EXPECT_LT(r.saturated_omitted.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(r.criterion_norm, 1e-12);
  EXPECT_TRUE(r.unsaturated.isApprox(r.saturated_included, 1e-12));
  EXPECT_TRUE(r.criterion.pass);
}

TEST(Wls, BalancedEqualsOls) {
  const auto data = random_data(2, 17, 5, 5);
  const ModelSpec spec(ShiftVector({0.3, 0.3}), {SubsetIndex(1), SubsetIndex(2)});
  EXPECT_TRUE(wls_fit(data, spec).coefficients.isApprox(unsaturated_fit(data, spec).coefficients, 1e-12));
}

TEST(Wls, SaturatedWlsEqualsOls) {
  const auto data = random_data(2, 18);
  const auto spec = ModelSpec::saturated(ShiftVector({0.4, 0.1}));
  EXPECT_TRUE(wls_fit(data, spec).terms().isApprox(saturated_fit(data, spec.delta()).fit.terms(), 1e-10));
}

TEST(Wls, SandwichMatchesTextbook) {
  const auto data = random_data(2, 19);
  const ModelSpec spec(ShiftVector({0.5, 0.5}), {SubsetIndex(1), SubsetIndex(2)});
  const auto d = build_design(data, spec);
  const auto counts = cell_summary(data, SummaryNeeds::Counts).counts;
  Eigen::VectorXd w(static_cast<Eigen::Index>(data.unit_count()));
  for (std::size_t i = 0; i < data.unit_count(); ++i) w[static_cast<Eigen::Index>(i)] = 1.0 / counts[data.cell(i)];
  const Eigen::MatrixXd x = d.included();
  const Eigen::VectorXd y = outcomes(data);
  const Eigen::MatrixXd xtwx_inv = (x.transpose() * w.asDiagonal() * x).inverse();
  const Eigen::VectorXd beta = xtwx_inv * x.transpose() * w.asDiagonal() * y;
  const Eigen::VectorXd r = y - x * beta;
  const Eigen::VectorXd wr2 = (w.array().square() * r.array().square()).matrix();
  const Eigen::MatrixXd sandwich = xtwx_inv * x.transpose() * wr2.asDiagonal() * x * xtwx_inv;
  const auto f = wls_fit(data, spec);
  EXPECT_TRUE(f.coefficients.isApprox(beta, 1e-10));
  EXPECT_TRUE(f.robust_cov_full.isApprox(sandwich, 1e-9));
  EXPECT_TRUE(f.residuals.isApprox(r, 1e-10));
}

TEST(Phi, ProportionsOnly) {
  const auto data = random_data(3, 20);
  for (const auto& rec : verify_phi_invariance(data, ModelSpec(ShiftVector({0.1, 0.5, 0.7}), low_order_terms(3, 2)))) {
    EXPECT_TRUE(rec.pass) << rec.identity << " " << rec.max_rel_err;
  }
}
