#pragma once

#include <algorithm>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace factorial {

/// Default tolerance for identities that are exact in real arithmetic but
/// pass through a least-squares solve.
inline constexpr double kIdentityTolerance = 1e-8;

/// Outcome of checking one numeric identity.
struct VerificationRecord {
  std::string identity;
  double max_rel_err = 0.0;
  double tolerance = kIdentityTolerance;
  bool pass = false;
  std::string note;
};

/// max |a - b| divided by max(|b|_inf, scale, 1e-12). `scale` lets callers
/// supply the natural magnitude of the inputs when the expected value is
/// itself (close to) zero.
inline double max_rel_err(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& expected, double scale = 0.0) {
  if (actual.rows() != expected.rows() || actual.cols() != expected.cols()) {
    return std::numeric_limits<double>::infinity();
  }
  if (actual.size() == 0) return 0.0;
  const double denom = std::max({expected.cwiseAbs().maxCoeff(), scale, 1e-12});
  return (actual - expected).cwiseAbs().maxCoeff() / denom;
}

inline VerificationRecord make_record(std::string identity, const Eigen::MatrixXd& actual,
                                      const Eigen::MatrixXd& expected, double tolerance = kIdentityTolerance,
                                      double scale = 0.0) {
  VerificationRecord r;
  r.identity = std::move(identity);
  r.max_rel_err = max_rel_err(actual, expected, scale);
  r.tolerance = tolerance;
  r.pass = r.max_rel_err <= tolerance;
  return r;
}

}  // namespace factorial
