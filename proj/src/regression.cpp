#include "factorial/regression.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "factorial/contrasts.hpp"
#include "factorial/error.hpp"
#include "factorial/estimation.hpp"

namespace factorial {

namespace {

// Row of the full design for one cell: 1, then prod_{k in S}(z_k - delta_k)
// over canonical subsets S.
Eigen::RowVectorXd cell_design_row(std::size_t cell, const ShiftVector& delta,
                                   const std::vector<SubsetIndex>& subsets) {
  const int k_count = delta.size();
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(subsets.size() + 1));
  row[0] = 1.0;
  for (std::size_t j = 0; j < subsets.size(); ++j) {
    double v = 1.0;
    for (int k : subsets[j].members()) v *= cell_level(cell, k, k_count) - delta[k];
    row[static_cast<Eigen::Index>(j + 1)] = v;
  }
  return row;
}

Eigen::MatrixXd cell_design(const ShiftVector& delta) {
  const auto subsets = canonical_subsets(delta.size());
  const std::size_t q = std::size_t{1} << delta.size();
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(q));
  for (std::size_t z = 0; z < q; ++z) rows.row(static_cast<Eigen::Index>(z)) = cell_design_row(z, delta, subsets);
  return rows;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(cols[j]));
  return out;
}

Eigen::VectorXd outcome_vector(const AssignmentTable& data) {
  return Eigen::Map<const Eigen::VectorXd>(data.outcomes().data(), static_cast<Eigen::Index>(data.unit_count()));
}

Eigen::ColPivHouseholderQR<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& x, const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x.rows(), x.cols());
  qr.setThreshold(kRankTolerance);
  qr.compute(x);
  if (x.rows() < x.cols() || qr.rank() < x.cols()) {
    throw Error(ErrorCode::RankDeficient, std::string(what) + " has rank " + std::to_string(qr.rank()) + " < " +
                                              std::to_string(x.cols()) + " columns");
  }
  return qr;
}

FitResult least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd* sqrt_w,
                        bool has_intercept) {
  if (x.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "design rows and outcome length differ");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const Eigen::MatrixXd xs = sqrt_w ? Eigen::MatrixXd(sqrt_w->asDiagonal() * x) : x;
  const Eigen::VectorXd ys = sqrt_w ? Eigen::VectorXd(sqrt_w->cwiseProduct(y)) : y;
  const auto qr = factorize(xs, "design matrix");

  FitResult f;
  f.has_intercept = has_intercept;
  f.coefficients = qr.solve(ys);
  f.residuals = y - x * f.coefficients;

  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd q_thin = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
  // (X'X)^{-1} X' = P R^{-1} Q'
  const Eigen::MatrixXd hat_map = qr.colsPermutation() * (r_inv * q_thin.transpose());
  const Eigen::VectorXd scaled_resid = sqrt_w ? Eigen::VectorXd(sqrt_w->cwiseProduct(f.residuals)) : f.residuals;
  const Eigen::MatrixXd half = hat_map * scaled_resid.asDiagonal();
  f.robust_cov_full = half * half.transpose();
  const Eigen::MatrixXd rr = r_inv * r_inv.transpose();
  f.gram_inverse = qr.colsPermutation() * rr * qr.colsPermutation().transpose();
  return f;
}

std::vector<std::string> term_labels(const FactorSpec& spec, const std::vector<SubsetIndex>& terms) {
  std::vector<std::string> labels{"(Intercept)"};
  for (const auto& t : terms) labels.push_back(t.label(spec));
  return labels;
}

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

// ---------------------------------------------------------------------------
// ModelSpec

ModelSpec::ModelSpec(ShiftVector delta, std::vector<SubsetIndex> terms)
    : delta_(std::move(delta)), terms_(std::move(terms)) {
  if (terms_.empty()) throw Error(ErrorCode::InvalidArgument, "model needs at least one term");
  const std::uint32_t full = (1U << delta_.size()) - 1U;
  std::set<std::uint32_t> seen;
  for (const auto& t : terms_) {
    if ((t.mask() & ~full) != 0U) {
      throw Error(ErrorCode::InvalidArgument, "model term refers to a factor beyond K");
    }
    if (!seen.insert(t.mask()).second) throw Error(ErrorCode::InvalidArgument, "duplicate model term");
  }
  std::sort(terms_.begin(), terms_.end());
}

ModelSpec ModelSpec::saturated(ShiftVector delta) {
  auto terms = canonical_subsets(delta.size());
  return ModelSpec(std::move(delta), std::move(terms));
}

std::vector<SubsetIndex> ModelSpec::omitted_terms() const {
  std::vector<SubsetIndex> out;
  for (const auto& s : canonical_subsets(factor_count())) {
    if (std::find(terms_.begin(), terms_.end(), s) == terms_.end()) out.push_back(s);
  }
  return out;
}

bool ModelSpec::is_saturated() const noexcept {
  return terms_.size() + 1 == (std::size_t{1} << factor_count());
}

// ---------------------------------------------------------------------------
// Design

Eigen::MatrixXd DesignMatrix::included() const { return select_columns(full, included_columns); }
Eigen::MatrixXd DesignMatrix::omitted() const { return select_columns(full, omitted_columns); }

DesignMatrix build_design(const AssignmentTable& data, const ModelSpec& spec) {
  if (spec.factor_count() != data.factor_count()) {
    throw Error(ErrorCode::DimensionMismatch, "model and data disagree on the number of factors");
  }
  const Eigen::MatrixXd per_cell = cell_design(spec.delta());
  DesignMatrix d;
  d.full.resize(static_cast<Eigen::Index>(data.unit_count()), per_cell.cols());
  for (std::size_t i = 0; i < data.unit_count(); ++i) {
    d.full.row(static_cast<Eigen::Index>(i)) = per_cell.row(static_cast<Eigen::Index>(data.cell(i)));
  }
  const auto pos = canonical_positions(spec.factor_count());
  d.included_columns.push_back(0);
  for (const auto& t : spec.terms()) {
    d.included_columns.push_back(pos[t.mask()] + 1);
    d.included_terms.push_back(t);
  }
  for (const auto& t : spec.omitted_terms()) {
    d.omitted_columns.push_back(pos[t.mask()] + 1);
    d.omitted_terms.push_back(t);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Fits

Eigen::VectorXd FitResult::terms() const {
  return has_intercept ? Eigen::VectorXd(coefficients.tail(coefficients.size() - 1)) : coefficients;
}

Eigen::MatrixXd FitResult::robust_cov() const {
  if (!has_intercept) return robust_cov_full;
  const Eigen::Index m = robust_cov_full.rows() - 1;
  return robust_cov_full.bottomRightCorner(m, m);
}

Eigen::VectorXd FitResult::robust_se() const { return robust_cov().diagonal().cwiseMax(0.0).cwiseSqrt(); }

FitResult ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool has_intercept) {
  return least_squares(x, y, nullptr, has_intercept);
}

FitResult weighted_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                       bool has_intercept) {
  if (weights.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "weights and outcome length differ");
  if ((weights.array() < 0.0).any()) throw Error(ErrorCode::InvalidArgument, "weights must be non-negative");
  const Eigen::VectorXd sqrt_w = weights.cwiseSqrt();
  return least_squares(x, y, &sqrt_w, has_intercept);
}

SaturatedFit saturated_fit(const AssignmentTable& data, const ShiftVector& delta, bool throw_on_violation) {
  const auto spec = ModelSpec::saturated(delta);
  const auto design = build_design(data, spec);
  SaturatedFit out;
  out.fit = ols_fit(design.full, outcome_vector(data));
  out.fit.labels = term_labels(data.spec(), spec.terms());
  const auto summary = cell_summary(data, SummaryNeeds::Means);

  const auto g = contrast_matrix(product_scheme(delta)).rows;
  const Eigen::VectorXd y_hat = Eigen::Map<const Eigen::VectorXd>(summary.means.data(), g.cols());
  out.checks.push_back(make_record("saturated coefficients equal product-scheme moment estimates",
                                   out.fit.terms(), g * y_hat, kIdentityTolerance, max_abs(y_hat)));

  const bool variances_defined =
      std::all_of(summary.counts.begin(), summary.counts.end(), [](std::size_t c) { return c >= 2; });
  if (variances_defined) {
    const auto moments = moment_estimates(data);
    Eigen::VectorXd shrink(g.cols());
    for (Eigen::Index z = 0; z < g.cols(); ++z) {
      shrink[z] = 1.0 - 1.0 / static_cast<double>(moments.counts[static_cast<std::size_t>(z)]);
    }
    const Eigen::MatrixXd expected = g * shrink.asDiagonal() * moments.v_hat * g.transpose();
    out.checks.push_back(make_record("saturated robust covariance equals shrunken moment covariance",
                                     out.fit.robust_cov(), expected, kIdentityTolerance,
                                     moments.v_hat.diagonal().maxCoeff()));
  }
  if (throw_on_violation) {
    for (const auto& c : out.checks) {
      if (!c.pass) {
        throw Error(ErrorCode::IdentityViolation,
                    c.identity + " (max relative error " + std::to_string(c.max_rel_err) + ")");
      }
    }
  }
  return out;
}

FitResult unsaturated_fit(const AssignmentTable& data, const ModelSpec& spec) {
  const auto design = build_design(data, spec);
  auto fit = ols_fit(design.included(), outcome_vector(data));
  fit.labels = term_labels(data.spec(), spec.terms());
  return fit;
}

FitResult wls_fit(const AssignmentTable& data, const ModelSpec& spec) {
  const auto design = build_design(data, spec);
  const auto summary = cell_summary(data, SummaryNeeds::Counts);
  Eigen::VectorXd w(static_cast<Eigen::Index>(data.unit_count()));
  for (std::size_t i = 0; i < data.unit_count(); ++i) {
    w[static_cast<Eigen::Index>(i)] = 1.0 / static_cast<double>(summary.counts[data.cell(i)]);
  }
  auto fit = weighted_fit(design.included(), outcome_vector(data), w);
  fit.labels = term_labels(data.spec(), spec.terms());
  return fit;
}

// ---------------------------------------------------------------------------
// Omitted-term algebra

OmittedTermAlgebra omitted_algebra(const DesignMatrix& design) {
  const Eigen::MatrixXd plus = design.included();
  const Eigen::MatrixXd minus = design.omitted();
  const auto qr = factorize(plus, "included design");
  OmittedTermAlgebra a;
  a.phi = qr.solve(minus);
  a.residual_matrix = minus - plus * a.phi;
  if (minus.cols() > 0) factorize(a.residual_matrix, "omitted-term residual matrix");
  a.d = a.phi.bottomRows(a.phi.rows() - 1);
  return a;
}

Eigen::MatrixXd phi_from_proportions(const std::vector<double>& proportions, const ModelSpec& spec) {
  const std::size_t q = std::size_t{1} << spec.factor_count();
  if (proportions.size() != q) throw Error(ErrorCode::DimensionMismatch, "need one proportion per cell");
  const Eigen::MatrixXd per_cell = cell_design(spec.delta());
  const auto pos = canonical_positions(spec.factor_count());
  std::vector<std::size_t> inc{0};
  std::vector<std::size_t> om;
  for (const auto& t : spec.terms()) inc.push_back(pos[t.mask()] + 1);
  for (const auto& t : spec.omitted_terms()) om.push_back(pos[t.mask()] + 1);
  Eigen::VectorXd sqrt_e(static_cast<Eigen::Index>(q));
  for (std::size_t z = 0; z < q; ++z) sqrt_e[static_cast<Eigen::Index>(z)] = std::sqrt(proportions[z]);
  const Eigen::MatrixXd plus = sqrt_e.asDiagonal() * select_columns(per_cell, inc);
  const Eigen::MatrixXd minus = sqrt_e.asDiagonal() * select_columns(per_cell, om);
  return factorize(plus, "cell-level included design").solve(minus);
}

OmittedRelationReport verify_omitted_relation(const AssignmentTable& data, const ModelSpec& spec) {
  const auto design = build_design(data, spec);
  const Eigen::VectorXd y = outcome_vector(data);
  const auto n = static_cast<double>(data.unit_count());
  const double y_scale = max_abs(y);

  const auto saturated = ols_fit(design.full, y);
  const auto unsaturated = ols_fit(design.included(), y);
  auto alg = omitted_algebra(design);

  std::vector<std::size_t> inc;
  std::vector<std::size_t> om;
  for (std::size_t j = 1; j < design.included_columns.size(); ++j) inc.push_back(design.included_columns[j] - 1);
  for (auto c : design.omitted_columns) om.push_back(c - 1);
  const Eigen::VectorXd gamma = saturated.terms();

  OmittedRelationReport r;
  r.unsaturated = unsaturated.terms();
  r.saturated_included = select_entries(gamma, inc);
  r.saturated_omitted = select_entries(gamma, om);
  r.d = alg.d;
  const Eigen::VectorXd d_gamma = alg.d * r.saturated_omitted;
  r.d_gamma_minus_norm = max_abs(d_gamma);
  r.relation = make_record("unsaturated coefficients equal saturated plus D times omitted",
                           r.unsaturated, r.saturated_included + d_gamma, kIdentityTolerance, y_scale);

  // Centered columns stand in for P_N.
  Eigen::MatrixXd plus_c = design.included().rightCols(static_cast<Eigen::Index>(inc.size()));
  Eigen::MatrixXd minus_c = design.omitted();
  plus_c.rowwise() -= plus_c.colwise().mean();
  minus_c.rowwise() -= minus_c.colwise().mean();
  const Eigen::MatrixXd plus_full = design.included();
  const Eigen::MatrixXd minus_full = design.omitted();
  r.orthogonal_raw = minus_full.cols() == 0 || (plus_full.transpose() * minus_full).cwiseAbs().maxCoeff() / n <= 1e-12;
  r.orthogonal_centered =
      minus_full.cols() == 0 || (plus_c.transpose() * minus_c).cwiseAbs().maxCoeff() / n <= 1e-12;

  Eigen::VectorXd criterion = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(inc.size()));
  if (!om.empty()) {
    const Eigen::VectorXd theta = factorize(alg.residual_matrix, "omitted-term residual matrix").solve(y);
    criterion = plus_c.transpose() * (minus_c * theta);
  }
  r.criterion_norm = max_abs(criterion) / n;

  // The criterion equals the centered Gram of the included terms times
  // D gamma_minus, so it vanishes exactly when D gamma_minus does.
  const Eigen::VectorXd via_d = plus_c.transpose() * plus_c * d_gamma;
  r.criterion = make_record("centered criterion vanishes iff D times omitted coefficients vanishes",
                            criterion / n, via_d / n, kIdentityTolerance, y_scale);
  const double zero_tol = 1e-9 * std::max(y_scale, 1e-12);
  const bool d_zero = r.d_gamma_minus_norm <= zero_tol;
  const bool crit_zero = r.criterion_norm <= zero_tol;
  if (d_zero != crit_zero && r.criterion.pass) {
    r.criterion.pass = false;
    r.criterion.note = "zero pattern of D gamma_minus and criterion disagree";
  }
  return r;
}

}  // namespace factorial
