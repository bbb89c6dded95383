#include <gtest/gtest.h>

#include "factorial/estimation.hpp"
#include "factorial/identities.hpp"
#include "support.hpp"

using namespace factorial;
using factorial::testing::random_data;
using factorial::testing::random_delta;

namespace {

void expect_all_pass(const std::vector<VerificationRecord>& records) {
  ASSERT_FALSE(records.empty());
  for (const auto& r : records) EXPECT_TRUE(r.pass) << r.identity << " err=" << r.max_rel_err;
}

}  // namespace

TEST(Identities, TreatmentBasedRandom) {
  for (int k = 1; k <= 4; ++k) expect_all_pass(verify_treatment_based(random_data(k, 40 + k)));
}

TEST(Identities, SaturatedRandom) {
  SplitMix64 rng(41);
  for (int k = 1; k <= 4; ++k) {
    for (int rep = 0; rep < 3; ++rep) {
      expect_all_pass(verify_saturated(random_data(k, 100 * k + rep), ShiftVector(random_delta(k, rng))));
    }
  }
}

TEST(Identities, PerturbationIsCaught) {
  const auto records = verify_saturated(random_data(2, 42), ShiftVector({0.3, 0.4}), 1e-3);
  bool any_fail = false;
  for (const auto& r : records) any_fail = any_fail || !r.pass;
  EXPECT_TRUE(any_fail);
}

TEST(Identities, ShiftStrategies) {
  for (std::uint64_t seed = 50; seed < 55; ++seed) expect_all_pass(verify_shift_strategies(random_data(2, seed)));
  EXPECT_FACTORIAL_ERROR(verify_shift_strategies(random_data(3, 1)), ErrorCode::DimensionMismatch);
}

TEST(Identities, BaselineConditionalEffectsByHand) {
  // delta = 0 main effect of A is the contrast of cells 10 and 00
  const auto data = random_data(2, 56);
  const auto m = moment_estimates(data);
  const auto f = saturated_fit(data, ShiftVector({0.0, 0.0})).fit;
  EXPECT_NEAR(f.terms()[0], m.y_hat[2] - m.y_hat[0], 1e-10);
  EXPECT_NEAR(f.terms()[1], m.y_hat[1] - m.y_hat[0], 1e-10);
  EXPECT_NEAR(f.terms()[2], m.y_hat[3] - m.y_hat[2] - m.y_hat[1] + m.y_hat[0], 1e-10);
}

TEST(Identities, AdditiveWeights) {
  SplitMix64 rng(57);
  for (int rep = 0; rep < 5; ++rep) {
    expect_all_pass(verify_additive_weights(random_data(2, 60 + rep), ShiftVector(random_delta(2, rng))));
  }
}

TEST(Identities, AdditiveWeightsBalancedAreHalf) {
  // balanced: both effective weights reduce to 1/2
  const auto data = random_data(2, 58, 6, 6);
  const auto alg = omitted_algebra(build_design(data, ModelSpec(ShiftVector({0.5, 0.5}), low_order_terms(2, 1))));
  EXPECT_NEAR(alg.d(0, 0), 0.0, 1e-14);
  EXPECT_NEAR(alg.d(1, 0), 0.0, 1e-14);
}

TEST(Identities, ThreeFactorClosedForm) {
  SplitMix64 rng(59);
  for (int rep = 0; rep < 5; ++rep) {
    expect_all_pass(verify_three_factor_d(random_data(3, 70 + rep), ShiftVector(random_delta(3, rng))));
  }
}

TEST(Identities, ThreeFactorClosedFormBalanced) {
  const auto d = closed_form_d_2x3(std::vector<double>(8, 0.125), ShiftVector::constant(3, 0.5));
  EXPECT_LT(d.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Identities, OmittedTermsRandomModels) {
  SplitMix64 rng(80);
  for (int k = 2; k <= 4; ++k) {
    for (int rep = 0; rep < 4; ++rep) {
      std::vector<SubsetIndex> terms;
      for (const auto& s : canonical_subsets(k)) {
        if (rng.uniform() < 0.5) terms.push_back(s);
      }
      if (terms.empty() || terms.size() == canonical_subsets(k).size()) terms = low_order_terms(k, 1);
      const ModelSpec spec(ShiftVector(random_delta(k, rng)), terms);
      expect_all_pass(verify_omitted_terms(random_data(k, 90 + 10 * k + rep), spec));
    }
  }
}

TEST(Identities, BalancedOrthogonality) {
  for (int k = 2; k <= 4; ++k) {
    const auto data = random_data(k, 120 + k, 3, 3);
    expect_all_pass(verify_balanced_orthogonality(data, ModelSpec(ShiftVector::constant(k, 0.5), low_order_terms(k, 1))));
  }
}

TEST(Identities, UnbalancedOrthogonalityFails) {
  const auto data = random_data(2, 125, 2, 12);
  const auto records =
      verify_balanced_orthogonality(data, ModelSpec(ShiftVector::constant(2, 0.5), low_order_terms(2, 1)));
  bool any_fail = false;
  for (const auto& r : records) any_fail = any_fail || !r.pass;
  EXPECT_TRUE(any_fail);
}

TEST(Identities, InverseSizeWeighting) {
  for (int k = 2; k <= 4; ++k) {
    expect_all_pass(verify_wls(random_data(k, 130 + k), ModelSpec(ShiftVector::constant(k, 0.5), low_order_terms(k, 1))));
  }
}

TEST(Identities, Suite) {
  SplitMix64 rng(140);
  for (int k = 1; k <= 4; ++k) {
    const auto data = random_data(k, 140 + k);
    const auto r = run_identity_suite(data, ShiftVector(random_delta(k, rng)));
    EXPECT_TRUE(r.all_pass());
    for (const auto& rec : r.records) EXPECT_TRUE(rec.pass) << "K=" << k << " " << rec.identity;
  }
}

TEST(Identities, SuiteReportsPerturbation) {
  IdentitySuiteOptions o;
  o.perturbation = 1e-4;
  EXPECT_FALSE(run_identity_suite(random_data(3, 150), ShiftVector::constant(3, 0.4), o).all_pass());
}

TEST(Identities, LowOrderTerms) {
  EXPECT_EQ(low_order_terms(3, 2).size(), 6U);
  EXPECT_EQ(low_order_terms(4, 1).size(), 4U);
  EXPECT_EQ(low_order_terms(2, 2).size(), 3U);
}
