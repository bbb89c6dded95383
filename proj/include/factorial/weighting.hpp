#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "factorial/design.hpp"

namespace factorial {

/// Absolute tolerance for normalization and product-structure checks.
inline constexpr double kWeightTolerance = 1e-12;

/// Location-shift parameters (delta_1, ..., delta_K), each in [0, 1].
class ShiftVector {
 public:
  explicit ShiftVector(std::vector<double> delta);
  static ShiftVector constant(int factor_count, double value);

  int size() const noexcept { return static_cast<int>(delta_.size()); }
  double operator[](int k) const { return delta_.at(static_cast<std::size_t>(k)); }
  const std::vector<double>& values() const noexcept { return delta_; }

  bool operator==(const ShiftVector&) const = default;

 private:
  std::vector<double> delta_;
};

/// A coherent weighting scheme, always stored through its joint distribution
/// over the 2^K treatment cells. Every marginal is derived from the joint by
/// summation, so coherence holds by construction.
class WeightingScheme {
 public:
  int factor_count() const noexcept { return factor_count_; }
  std::size_t cell_count() const noexcept { return joint_.size(); }
  const std::vector<double>& joint() const noexcept { return joint_; }
  double mass(std::size_t cell) const { return joint_.at(cell); }

  /// Marginal law of the factors selected by `mask`. Sub-cells are numbered
  /// in binary-counting order over the selected factors (later factor
  /// fastest). An empty mask yields the single weight 1.
  std::vector<double> marginal(std::uint32_t mask) const;

  /// Weights pi(z_Kbar) used to average conditional effects of `subset`
  /// over the levels of the remaining factors.
  std::vector<double> averaging_weights(const SubsetIndex& subset) const;

  /// pi(1_k): probability that factor k sits at level 1.
  double marginal_one(int k) const;
  std::vector<double> one_dimensional() const;

  friend WeightingScheme from_joint(int factor_count, std::vector<double> mass, double tol);

 private:
  WeightingScheme(int factor_count, std::vector<double> joint)
      : factor_count_(factor_count), joint_(std::move(joint)) {}

  int factor_count_;
  std::vector<double> joint_;
};

/// Position of `cell` restricted to the factors in `mask`.
std::size_t project_cell(std::size_t cell, std::uint32_t mask, int factor_count) noexcept;

WeightingScheme from_joint(int factor_count, std::vector<double> mass, double tol = kWeightTolerance);
WeightingScheme equal_scheme(int factor_count);
WeightingScheme empirical_scheme(const CellSummary& summary);
WeightingScheme product_scheme(const ShiftVector& delta);
/// Product scheme sharing all K one-dimensional marginals with `scheme`.
WeightingScheme pi_cross(const WeightingScheme& scheme);
bool is_product(const WeightingScheme& scheme, double tol = kWeightTolerance);

}  // namespace factorial
