#include "factorial/identities.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "factorial/contrasts.hpp"
#include "factorial/error.hpp"
#include "factorial/estimation.hpp"

namespace factorial {

namespace {

constexpr double kTightTolerance = 1e-10;

Eigen::VectorXd outcome_vector(const AssignmentTable& data) {
  return Eigen::Map<const Eigen::VectorXd>(data.outcomes().data(), static_cast<Eigen::Index>(data.unit_count()));
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

Eigen::VectorXd cell_means(const AssignmentTable& data) {
  const auto s = cell_summary(data, SummaryNeeds::Means);
  return Eigen::Map<const Eigen::VectorXd>(s.means.data(), static_cast<Eigen::Index>(s.means.size()));
}

double proportion_at_one(const AssignmentTable& data, int k) {
  std::size_t ones = 0;
  for (std::size_t i = 0; i < data.unit_count(); ++i) ones += static_cast<std::size_t>(data.level(i, k));
  return static_cast<double>(ones) / static_cast<double>(data.unit_count());
}

AssignmentTable replicate_units(const AssignmentTable& data, int copies) {
  std::vector<std::size_t> cells;
  std::vector<double> y;
  for (int c = 0; c < copies; ++c) {
    cells.insert(cells.end(), data.cells().begin(), data.cells().end());
    y.insert(y.end(), data.outcomes().begin(), data.outcomes().end());
  }
  return AssignmentTable(data.spec(), std::move(cells), std::move(y));
}

void append(std::vector<VerificationRecord>& out, std::vector<VerificationRecord> more) {
  out.insert(out.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
}

bool is_balanced(const AssignmentTable& data) {
  const auto s = cell_summary(data, SummaryNeeds::Counts);
  return std::all_of(s.counts.begin(), s.counts.end(), [&](std::size_t c) { return c == s.counts.front(); });
}

}  // namespace

std::vector<SubsetIndex> low_order_terms(int factor_count, int max_order) {
  std::vector<SubsetIndex> out;
  for (const auto& s : canonical_subsets(factor_count)) {
    if (s.size() <= max_order) out.push_back(s);
  }
  return out;
}

std::vector<VerificationRecord> verify_treatment_based(const AssignmentTable& data) {
  const auto moments = moment_estimates(data);
  const auto fit = treatment_based_fit(data);
  Eigen::VectorXd shrink(moments.y_hat.size());
  for (Eigen::Index z = 0; z < shrink.size(); ++z) {
    shrink[z] = 1.0 - 1.0 / static_cast<double>(moments.counts[static_cast<std::size_t>(z)]);
  }
  return {
      make_record("treatment-based coefficients equal cell means", fit.coefficients, moments.y_hat,
                  kTightTolerance, max_abs(moments.y_hat)),
      make_record("treatment-based robust covariance equals diag(1 - 1/N_z) V_hat", fit.robust_cov,
                  Eigen::MatrixXd(shrink.asDiagonal() * moments.v_hat), kTightTolerance,
                  max_abs(moments.v_hat)),
  };
}

std::vector<VerificationRecord> verify_saturated(const AssignmentTable& data, const ShiftVector& delta,
                                                 double perturbation) {
  const auto moments = moment_estimates(data);
  const auto fit = saturated_fit(data, delta, /*throw_on_violation=*/false).fit;
  const Eigen::MatrixXd g = contrast_matrix(product_scheme(delta)).rows;
  Eigen::VectorXd shrink(moments.y_hat.size());
  for (Eigen::Index z = 0; z < shrink.size(); ++z) {
    shrink[z] = 1.0 / static_cast<double>(moments.counts[static_cast<std::size_t>(z)]);
  }
  const Eigen::MatrixXd expected_cov =
      g * moments.v_hat * g.transpose() - g * shrink.asDiagonal() * moments.v_hat * g.transpose();
  const Eigen::VectorXd gamma = fit.terms().array() + perturbation;
  return {
      make_record("saturated coefficients equal G Y_hat", gamma, g * moments.y_hat, kIdentityTolerance,
                  max_abs(moments.y_hat)),
      make_record("saturated robust covariance equals G V_hat G' - G diag(1/N_z) V_hat G'", fit.robust_cov(),
                  expected_cov, kIdentityTolerance, max_abs(moments.v_hat)),
  };
}

std::vector<VerificationRecord> verify_shift_strategies(const AssignmentTable& data) {
  if (data.factor_count() != 2) throw Error(ErrorCode::DimensionMismatch, "shift strategies need K = 2");
  const Eigen::VectorXd y_hat = cell_means(data);
  const double scale = max_abs(y_hat);
  // cells: 00, 01, 10, 11 with A the slower factor
  const Eigen::Vector3d baseline(y_hat[2] - y_hat[0], y_hat[1] - y_hat[0], y_hat[3] - y_hat[2] - y_hat[1] + y_hat[0]);
  const Eigen::VectorXd gamma0 = saturated_fit(data, ShiftVector({0.0, 0.0}), false).fit.terms();

  const double e_a = proportion_at_one(data, 0);
  const double e_b = proportion_at_one(data, 1);
  const Eigen::VectorXd gamma_e = saturated_fit(data, ShiftVector({e_a, e_b}), false).fit.terms();
  const Eigen::Vector3d corrected(gamma0[0] + e_b * gamma0[2], gamma0[1] + e_a * gamma0[2], gamma0[2]);

  const Eigen::VectorXd gamma_half = saturated_fit(data, ShiftVector({0.5, 0.5}), false).fit.terms();
  Eigen::MatrixXd sign(static_cast<Eigen::Index>(data.unit_count()), 4);
  for (std::size_t i = 0; i < data.unit_count(); ++i) {
    const double a = 2.0 * data.level(i, 0) - 1.0;
    const double b = 2.0 * data.level(i, 1) - 1.0;
    sign.row(static_cast<Eigen::Index>(i)) << 1.0, a, b, a * b;
  }
  const Eigen::VectorXd sign_terms = ols_fit(sign, outcome_vector(data)).terms();
  const Eigen::Vector3d scaled(2.0 * sign_terms[0], 2.0 * sign_terms[1], 4.0 * sign_terms[2]);

  return {
      make_record("zero shift gives baseline conditional effects", gamma0, baseline, kIdentityTolerance, scale),
      make_record("empirical shift gives baseline effects plus proportion-weighted interaction", gamma_e, corrected,
                  kIdentityTolerance, scale),
      make_record("half shift equals 2^|K| times sign-coded coefficients", gamma_half, scaled, kIdentityTolerance,
                  scale),
  };
}

std::vector<VerificationRecord> verify_additive_weights(const AssignmentTable& data, const ShiftVector& delta) {
  if (data.factor_count() != 2) throw Error(ErrorCode::DimensionMismatch, "additive weights need K = 2");
  const ModelSpec spec(delta, {SubsetIndex(0b01), SubsetIndex(0b10)});
  const auto alg = omitted_algebra(build_design(data, spec));
  const auto e = cell_summary(data, SummaryNeeds::Means).proportions;
  double sigma = 0.0;
  for (double v : e) sigma += 1.0 / v;

  // Row 0 of D belongs to A and mixes conditional effects of A over B.
  const Eigen::Vector2d from_d(delta[1] + alg.d(0, 0), delta[0] + alg.d(1, 0));
  const Eigen::Vector2d closed((1.0 / e[0] + 1.0 / e[2]) / sigma, (1.0 / e[0] + 1.0 / e[1]) / sigma);

  const Eigen::VectorXd y_hat = cell_means(data);
  const Eigen::VectorXd gamma = unsaturated_fit(data, spec).terms();
  const double wb1 = closed[0];
  const double wa1 = closed[1];
  const Eigen::Vector2d mixed((1.0 - wb1) * (y_hat[2] - y_hat[0]) + wb1 * (y_hat[3] - y_hat[1]),
                              (1.0 - wa1) * (y_hat[1] - y_hat[0]) + wa1 * (y_hat[3] - y_hat[2]));
  return {
      make_record("additive-model effective level-1 weights equal inverse-proportion closed form", from_d, closed,
                  kTightTolerance, 1.0),
      make_record("additive-model coefficients equal weighted conditional effects", gamma, mixed,
                  kTightTolerance, max_abs(y_hat)),
  };
}

Eigen::MatrixXd closed_form_d_2x3(const std::vector<double>& e, const ShiftVector& delta) {
  if (e.size() != 8 || delta.size() != 3) throw Error(ErrorCode::DimensionMismatch, "closed form D needs K = 3");
  const auto inv = [&](int a, int b, int c) { return 1.0 / e[static_cast<std::size_t>(4 * a + 2 * b + c)]; };
  double sigma = 0.0;
  for (double v : e) sigma += 1.0 / v;
  const double da = delta[0];
  const double db = delta[1];
  const double dc = delta[2];

  Eigen::Matrix<double, 6, 1> v;
  v << -(inv(0, 0, 0) + inv(1, 0, 0)), -(inv(0, 0, 0) + inv(0, 1, 0)), -(inv(0, 0, 0) + inv(0, 0, 1)), 0.0, 0.0,
      0.0;
  for (int x = 0; x < 2; ++x) {
    for (int w = 0; w < 2; ++w) {
      v[3] += inv(x, w, 0);
      v[4] += inv(x, 0, w);
      v[5] += inv(0, x, w);
    }
  }
  Eigen::Matrix<double, 6, 6> m = Eigen::Matrix<double, 6, 6>::Identity();
  m.block<3, 3>(0, 3) << db, dc, 0.0, da, 0.0, dc, 0.0, da, db;
  Eigen::Matrix<double, 6, 1> w;
  w << db * dc, da * dc, da * db, dc, db, da;
  return (m * v) / sigma - w;
}

std::vector<VerificationRecord> verify_three_factor_d(const AssignmentTable& data, const ShiftVector& delta) {
  if (data.factor_count() != 3) throw Error(ErrorCode::DimensionMismatch, "three-factor D needs K = 3");
  const ModelSpec spec(delta, low_order_terms(3, 2));
  const auto alg = omitted_algebra(build_design(data, spec));
  const auto e = cell_summary(data, SummaryNeeds::Means).proportions;
  return {make_record("main plus two-way D equals inverse-proportion closed form", alg.d, closed_form_d_2x3(e, delta),
                      kIdentityTolerance, 1.0)};
}

std::vector<VerificationRecord> verify_omitted_terms(const AssignmentTable& data, const ModelSpec& spec,
                                                     double perturbation) {
  auto r = verify_omitted_relation(data, spec);
  if (perturbation != 0.0) {
    const Eigen::VectorXd shifted = r.unsaturated.array() + perturbation;
    const Eigen::VectorXd expected = r.saturated_included + r.d * r.saturated_omitted;
    r.relation = make_record(r.relation.identity, shifted, expected, r.relation.tolerance,
                             max_abs(outcome_vector(data)));
  }
  return {r.relation, r.criterion};
}

std::vector<VerificationRecord> verify_balanced_orthogonality(const AssignmentTable& data, const ModelSpec& spec) {
  const auto r = verify_omitted_relation(data, spec);
  auto rec = make_record("balanced half-shift unsaturated coefficients equal saturated ones", r.unsaturated,
                         r.saturated_included, kTightTolerance, max_abs(outcome_vector(data)));
  if (!r.orthogonal_raw) rec.note = "included and omitted columns not orthogonal";
  return {rec};
}

std::vector<VerificationRecord> verify_wls(const AssignmentTable& data, const ModelSpec& spec) {
  const auto w = wls_fit(data, spec).terms();
  const auto sat = saturated_fit(data, spec.delta(), false).fit.terms();
  const auto pos = canonical_positions(spec.factor_count());
  std::vector<std::size_t> inc;
  for (const auto& t : spec.terms()) inc.push_back(pos[t.mask()]);
  return {make_record("inverse-size weighted fit recovers saturated coefficients", w, select_entries(sat, inc),
                      kIdentityTolerance, max_abs(outcome_vector(data)))};
}

std::vector<VerificationRecord> verify_phi_invariance(const AssignmentTable& data, const ModelSpec& spec,
                                                      int copies) {
  const auto base = omitted_algebra(build_design(data, spec));
  const auto dup = omitted_algebra(build_design(replicate_units(data, copies), spec));
  const auto e = cell_summary(data, SummaryNeeds::Counts).proportions;
  const Eigen::MatrixXd cell_level = phi_from_proportions(e, spec);
  return {
      make_record("phi unchanged by unit replication", dup.phi, base.phi, kTightTolerance, 1.0),
      make_record("phi equals its cell-proportion construction", base.phi, cell_level, kTightTolerance, 1.0),
  };
}

bool IdentitySuiteResult::all_pass() const {
  return std::all_of(records.begin(), records.end(), [](const VerificationRecord& r) { return r.pass; });
}

IdentitySuiteResult run_identity_suite(const AssignmentTable& data, const ShiftVector& delta,
                                       const IdentitySuiteOptions& options) {
  const int k = data.factor_count();
  if (delta.size() != k) throw Error(ErrorCode::DimensionMismatch, "delta length differs from K");
  IdentitySuiteResult out;
  const auto terms = options.terms.empty() ? low_order_terms(k, k <= 2 ? 1 : 2) : options.terms;
  const ModelSpec spec(delta, terms);
  const ModelSpec half_spec(ShiftVector::constant(k, 0.5), terms);

  append(out.records, verify_treatment_based(data));
  append(out.records, verify_saturated(data, delta, options.perturbation));
  if (k == 2) {
    append(out.records, verify_shift_strategies(data));
    append(out.records, verify_additive_weights(data, delta));
  } else {
    out.skipped.emplace_back("shift strategies: needs K = 2");
    out.skipped.emplace_back("additive-model weights: needs K = 2");
  }
  if (k == 3) {
    append(out.records, verify_three_factor_d(data, delta));
  } else {
    out.skipped.emplace_back("three-factor closed-form D: needs K = 3");
  }
  append(out.records, verify_omitted_terms(data, spec, options.perturbation));
  if (is_balanced(data)) {
    append(out.records, verify_balanced_orthogonality(data, half_spec));
  } else {
    out.skipped.emplace_back("balanced orthogonality: cell sizes differ");
  }
  append(out.records, verify_wls(data, half_spec));
  append(out.records, verify_phi_invariance(data, spec));
  return out;
}

}  // namespace factorial
