#include "factorial/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "factorial/error.hpp"
#include "factorial/regression.hpp"

namespace factorial {

MomentEstimates moment_estimates(const AssignmentTable& data) {
  const auto summary = cell_summary(data, SummaryNeeds::Variances);
  const auto q = static_cast<Eigen::Index>(data.cell_count());
  MomentEstimates m;
  m.y_hat = Eigen::Map<const Eigen::VectorXd>(summary.means.data(), q);
  m.v_hat = Eigen::MatrixXd::Zero(q, q);
  for (Eigen::Index z = 0; z < q; ++z) {
    m.v_hat(z, z) = summary.variances[static_cast<std::size_t>(z)] /
                    static_cast<double>(summary.counts[static_cast<std::size_t>(z)]);
  }
  m.counts = summary.counts;
  return m;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<>{}, p);
}

JointTest wald_joint_test(const Eigen::VectorXd& estimate, const Eigen::MatrixXd& covariance,
                          const std::vector<std::size_t>& positions) {
  if (positions.empty()) throw Error(ErrorCode::InvalidArgument, "joint test needs at least one effect");
  for (auto p : positions) {
    if (p >= static_cast<std::size_t>(estimate.size())) {
      throw Error(ErrorCode::DimensionMismatch, "joint test position out of range");
    }
  }
  const Eigen::VectorXd est = select_entries(estimate, positions);
  const Eigen::MatrixXd cov = select_rows(select_rows(covariance, positions).transpose(), positions);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double cutoff = 1e-10 * std::max(lambda.cwiseAbs().maxCoeff(), 0.0);
  JointTest t;
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * est;
  for (Eigen::Index j = 0; j < lambda.size(); ++j) {
    if (lambda[j] > cutoff && lambda[j] > 0.0) {
      t.statistic += proj[j] * proj[j] / lambda[j];
      ++t.df;
    }
  }
  if (t.df > 0) {
    t.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<>(t.df), t.statistic));
  }
  return t;
}

InferenceReport effect_estimates(const AssignmentTable& data, const WeightingScheme& scheme, double alpha,
                                 const std::vector<std::vector<SubsetIndex>>& joint_tests) {
  if (scheme.factor_count() != data.factor_count()) {
    throw Error(ErrorCode::DimensionMismatch, "scheme and data disagree on the number of factors");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");

  const auto moments = moment_estimates(data);
  auto g = contrast_matrix(scheme);

  InferenceReport r{data.spec(), std::move(g.row_index), {}, {}, {}, {}, {}, {}, alpha, 0.0, {}};
  r.estimate = g.rows * moments.y_hat;
  r.covariance = g.rows * moments.v_hat * g.rows.transpose();
  r.covariance = 0.5 * (r.covariance + r.covariance.transpose()).eval();
  r.critical_value = normal_quantile(1.0 - alpha / 2.0);
  r.se = r.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.z.resize(r.estimate.size());
  for (Eigen::Index j = 0; j < r.estimate.size(); ++j) {
    r.z[j] = r.se[j] > 0.0 ? r.estimate[j] / r.se[j] : std::numeric_limits<double>::quiet_NaN();
  }
  r.ci_low = r.estimate - r.critical_value * r.se;
  r.ci_high = r.estimate + r.critical_value * r.se;

  const auto pos = canonical_positions(data.factor_count());
  for (const auto& effects : joint_tests) {
    std::vector<std::size_t> positions;
    for (const auto& s : effects) {
      if ((s.mask() >> data.factor_count()) != 0U) {
        throw Error(ErrorCode::DimensionMismatch, "joint-test effect refers to a factor beyond K");
      }
      positions.push_back(pos[s.mask()]);
    }
    auto t = wald_joint_test(r.estimate, r.covariance, positions);
    t.effects = effects;
    r.joint_tests.push_back(std::move(t));
  }
  return r;
}

TreatmentFit treatment_based_fit(const AssignmentTable& data) {
  cell_summary(data, SummaryNeeds::Means);
  const auto n = static_cast<Eigen::Index>(data.unit_count());
  const auto q = static_cast<Eigen::Index>(data.cell_count());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, q);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, static_cast<Eigen::Index>(data.cell(static_cast<std::size_t>(i)))) = 1.0;
    y[i] = data.outcome(static_cast<std::size_t>(i));
  }
  auto fit = ols_fit(x, y, /*has_intercept=*/false);
  return TreatmentFit{std::move(fit.coefficients), std::move(fit.robust_cov_full)};
}

}  // namespace factorial
