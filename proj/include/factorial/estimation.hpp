#pragma once

#include <vector>

#include <Eigen/Dense>

#include "factorial/contrasts.hpp"
#include "factorial/design.hpp"
#include "factorial/weighting.hpp"

namespace factorial {

/// Cell means Y_hat and the diagonal moment covariance estimator
/// V_hat = diag(S_hat(z,z) / N_z).
struct MomentEstimates {
  Eigen::VectorXd y_hat;
  Eigen::MatrixXd v_hat;
  std::vector<std::size_t> counts;
};

MomentEstimates moment_estimates(const AssignmentTable& data);

struct JointTest {
  std::vector<SubsetIndex> effects;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

/// Wald inference for the general factorial effects of one weighting scheme.
/// Confidence intervals use Normal quantiles.
struct InferenceReport {
  FactorSpec spec;
  std::vector<SubsetIndex> index;
  Eigen::VectorXd estimate;
  Eigen::MatrixXd covariance;
  Eigen::VectorXd se;
  Eigen::VectorXd z;
  Eigen::VectorXd ci_low;
  Eigen::VectorXd ci_high;
  double alpha = 0.05;
  double critical_value = 0.0;
  std::vector<JointTest> joint_tests;
};

InferenceReport effect_estimates(const AssignmentTable& data, const WeightingScheme& scheme, double alpha = 0.05,
                                 const std::vector<std::vector<SubsetIndex>>& joint_tests = {});

/// Chi-square Wald test of estimate[positions] = 0 using the Moore-Penrose
/// pseudoinverse of the covariance block; eigenvalues below 1e-10 times the
/// largest are treated as zero, and the degrees of freedom equal the rank.
JointTest wald_joint_test(const Eigen::VectorXd& estimate, const Eigen::MatrixXd& covariance,
                          const std::vector<std::size_t>& positions);

/// Upper quantile z with P(Z <= z) = p for standard Normal Z.
double normal_quantile(double p);

/// Regression of Y on the 2^K cell indicators without an intercept.
struct TreatmentFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd robust_cov;
};

TreatmentFit treatment_based_fit(const AssignmentTable& data);

}  // namespace factorial
