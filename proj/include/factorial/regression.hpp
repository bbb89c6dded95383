#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "factorial/design.hpp"
#include "factorial/verification.hpp"
#include "factorial/weighting.hpp"

namespace factorial {

/// Relative rank tolerance of the column-pivoted QR solver.
inline constexpr double kRankTolerance = 1e-10;

/// Location shifts plus the set of factor-subset terms kept beside the intercept.
class ModelSpec {
 public:
  ModelSpec(ShiftVector delta, std::vector<SubsetIndex> terms);
  static ModelSpec saturated(ShiftVector delta);

  const ShiftVector& delta() const noexcept { return delta_; }
  int factor_count() const noexcept { return delta_.size(); }
  /// Included terms in canonical order.
  const std::vector<SubsetIndex>& terms() const noexcept { return terms_; }
  /// Terms not in the model, in canonical order.
  std::vector<SubsetIndex> omitted_terms() const;
  bool is_saturated() const noexcept;

 private:
  ShiftVector delta_;
  std::vector<SubsetIndex> terms_;
};

/// Factor-based design: intercept, then one column per non-empty subset in
/// canonical order holding prod_{k in subset} (Z_ik - delta_k).
struct DesignMatrix {
  Eigen::MatrixXd full;
  std::vector<std::size_t> included_columns;  // includes column 0 (intercept)
  std::vector<std::size_t> omitted_columns;
  std::vector<SubsetIndex> included_terms;
  std::vector<SubsetIndex> omitted_terms;

  Eigen::MatrixXd included() const;
  Eigen::MatrixXd omitted() const;
};

DesignMatrix build_design(const AssignmentTable& data, const ModelSpec& spec);

/// Least-squares outputs. When `has_intercept` is set, coefficient 0 is the
/// intercept and the "term" accessors drop it.
struct FitResult {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd robust_cov_full;  // HC0 sandwich for every coefficient
  Eigen::MatrixXd gram_inverse;     // (X'WX)^{-1}
  bool has_intercept = true;
  std::vector<std::string> labels;

  Eigen::VectorXd terms() const;
  Eigen::MatrixXd robust_cov() const;
  Eigen::VectorXd robust_se() const;
};

/// Ordinary least squares with HC0 covariance. Throws RankDeficient when X
/// does not have full column rank at relative tolerance kRankTolerance.
FitResult ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool has_intercept = true);

/// Weighted least squares minimizing sum_i w_i r_i^2, with sandwich
/// covariance (X'WX)^{-1} X'W diag(r^2) W X (X'WX)^{-1}.
FitResult weighted_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                       bool has_intercept = true);

struct SaturatedFit {
  FitResult fit;
  std::vector<VerificationRecord> checks;
};

/// Saturated location-shifted fit. The coefficients and robust covariance
/// are checked against the moment route G Y_hat and
/// G diag(1 - 1/N_z) V_hat G' under the product scheme built from delta;
/// the covariance check runs only when every cell has two or more units.
/// Throws IdentityViolation on a failed check unless `throw_on_violation`
/// is false.
SaturatedFit saturated_fit(const AssignmentTable& data, const ShiftVector& delta, bool throw_on_violation = true);

FitResult unsaturated_fit(const AssignmentTable& data, const ModelSpec& spec);

/// Regression of the omitted columns on the included ones.
struct OmittedTermAlgebra {
  Eigen::MatrixXd phi;              // (F+'F+)^{-1} F+' F-
  Eigen::MatrixXd residual_matrix;  // F- - F+ phi
  Eigen::MatrixXd d;                // phi without its intercept row
  /// Relative gap between phi and the same matrix rebuilt from the cell
  /// proportions alone (one weighted row per cell).
  double cell_level_rel_err = 0.0;
};

OmittedTermAlgebra omitted_algebra(const DesignMatrix& design);
/// Phi computed from cell proportions e_z only.
Eigen::MatrixXd phi_from_proportions(const std::vector<double>& proportions, const ModelSpec& spec);

struct OmittedRelationReport {
  VerificationRecord relation;        // gamma_tilde_+ = gamma_hat_+ + D gamma_hat_-
  VerificationRecord criterion;       // D gamma_hat_- = 0 iff the centered criterion vanishes
  Eigen::VectorXd unsaturated;        // gamma_tilde_+
  Eigen::VectorXd saturated_included; // gamma_hat_+
  Eigen::VectorXd saturated_omitted;  // gamma_hat_-
  Eigen::MatrixXd d;
  double d_gamma_minus_norm = 0.0;    // |D gamma_hat_-|_inf
  double criterion_norm = 0.0;        // |F+[,-1]' P_N F- (R'R)^{-1} R'Y|_inf / N
  bool orthogonal_raw = false;        // F+' F- = 0
  bool orthogonal_centered = false;   // F+' P_N F- = 0
};

OmittedRelationReport verify_omitted_relation(const AssignmentTable& data, const ModelSpec& spec);

/// Fit on the included terms with unit weights 1 / N_{Z_i}.
FitResult wls_fit(const AssignmentTable& data, const ModelSpec& spec);

}  // namespace factorial
