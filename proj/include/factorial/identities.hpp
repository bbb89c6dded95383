#pragma once

#include <string>
#include <vector>

#include "factorial/design.hpp"
#include "factorial/regression.hpp"
#include "factorial/verification.hpp"
#include "factorial/weighting.hpp"

namespace factorial {

/// Numeric identity checks linking the moment route and least squares.
/// Each returns one or more records; none of them throws on a failed check.

/// Indicator regression without intercept: beta = Y_hat and its HC0
/// covariance equals diag(1 - 1/N_z) V_hat. Tolerance 1e-10.
std::vector<VerificationRecord> verify_treatment_based(const AssignmentTable& data);

/// Saturated shifted fit against G Y_hat and G diag(1 - 1/N_z) V_hat G'
/// under the product scheme of delta. `perturbation` is added to every fitted
/// coefficient before comparison (negative control).
std::vector<VerificationRecord> verify_saturated(const AssignmentTable& data, const ShiftVector& delta,
                                                 double perturbation = 0.0);

/// 2^2 only: delta = 0 gives baseline conditional effects, delta = empirical
/// proportions gives gamma_0 main effects plus proportion-weighted interaction,
/// delta = 1/2 equals 2^|K| times the sign-coded fit.
std::vector<VerificationRecord> verify_shift_strategies(const AssignmentTable& data);

/// 2^2 additive model: effective averaging weights read off the D algebra
/// against the closed form built from inverse cell proportions. Tolerance 1e-10.
std::vector<VerificationRecord> verify_additive_weights(const AssignmentTable& data, const ShiftVector& delta);

/// Closed-form D of the 2^3 main-effects plus two-way model.
Eigen::MatrixXd closed_form_d_2x3(const std::vector<double>& proportions, const ShiftVector& delta);
std::vector<VerificationRecord> verify_three_factor_d(const AssignmentTable& data, const ShiftVector& delta);

/// gamma_tilde_+ = gamma_hat_+ + D gamma_hat_- and the exact criterion.
std::vector<VerificationRecord> verify_omitted_terms(const AssignmentTable& data, const ModelSpec& spec,
                                                     double perturbation = 0.0);

/// Balanced data, delta = 1/2: unsaturated and saturated coefficients agree.
/// Tolerance 1e-10.
std::vector<VerificationRecord> verify_balanced_orthogonality(const AssignmentTable& data, const ModelSpec& spec);

/// WLS with weights 1/N_z and delta = 1/2 recovers the saturated coefficients.
std::vector<VerificationRecord> verify_wls(const AssignmentTable& data, const ModelSpec& spec);

/// Phi is unchanged by replicating every unit and agrees with the
/// cell-proportion construction.
std::vector<VerificationRecord> verify_phi_invariance(const AssignmentTable& data, const ModelSpec& spec,
                                                      int copies = 3);

struct IdentitySuiteOptions {
  double perturbation = 0.0;
  /// Model used by the omitted-term checks; main effects plus two-way
  /// interactions when empty.
  std::vector<SubsetIndex> terms;
};

struct IdentitySuiteResult {
  std::vector<VerificationRecord> records;
  std::vector<std::string> skipped;  // "<identity>: <reason>"
  bool all_pass() const;
};

/// Runs every identity applicable to `data`. Checks tied to a particular K
/// or to balance are listed in `skipped` when they do not apply.
IdentitySuiteResult run_identity_suite(const AssignmentTable& data, const ShiftVector& delta,
                                       const IdentitySuiteOptions& options = {});

/// Main effects plus all two-way interactions (everything when K <= 2).
std::vector<SubsetIndex> low_order_terms(int factor_count, int max_order = 2);

}  // namespace factorial
