#pragma once

#include <Eigen/Dense>

#include "factorial/design.hpp"

namespace factorial {

/// N x 2^K table of potential outcomes; entry (i, z) is Y_i(z), columns in
/// canonical cell order. Used as ground truth by the randomization tools.
class PotentialOutcomeTable {
 public:
  PotentialOutcomeTable(FactorSpec spec, Eigen::MatrixXd values);

  const FactorSpec& spec() const noexcept { return spec_; }
  int factor_count() const noexcept { return spec_.size(); }
  std::size_t unit_count() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cell_count() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  double operator()(std::size_t unit, std::size_t cell) const {
    return values_(static_cast<Eigen::Index>(unit), static_cast<Eigen::Index>(cell));
  }

  /// Column means: the average potential outcome under each cell.
  const Eigen::VectorXd& means() const noexcept { return means_; }
  /// Finite-population covariance with divisor N - 1.
  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }

  /// The data observed when unit i receives cell `cells[i]`.
  AssignmentTable observe(const std::vector<std::size_t>& cells) const;

 private:
  FactorSpec spec_;
  Eigen::MatrixXd values_;
  Eigen::VectorXd means_;
  Eigen::MatrixXd covariance_;
};

}  // namespace factorial
