#include "factorial/weighting.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "factorial/error.hpp"

namespace factorial {

ShiftVector::ShiftVector(std::vector<double> delta) : delta_(std::move(delta)) {
  if (delta_.empty() || static_cast<int>(delta_.size()) > kMaxFactors) {
    throw Error(ErrorCode::InvalidArgument, "shift vector length must be in [1, 16]");
  }
  for (double d : delta_) {
    if (!(d >= 0.0 && d <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "shift " + std::to_string(d) + " outside [0, 1]");
    }
  }
}

ShiftVector ShiftVector::constant(int factor_count, double value) {
  return ShiftVector(std::vector<double>(static_cast<std::size_t>(factor_count), value));
}

std::size_t project_cell(std::size_t cell, std::uint32_t mask, int factor_count) noexcept {
  std::size_t sub = 0;
  for (int k = 0; k < factor_count; ++k) {
    if ((mask >> k) & 1U) sub = (sub << 1) | static_cast<std::size_t>(cell_level(cell, k, factor_count));
  }
  return sub;
}

std::vector<double> WeightingScheme::marginal(std::uint32_t mask) const {
  const std::uint32_t full = (1U << factor_count_) - 1U;
  if ((mask & ~full) != 0U) throw Error(ErrorCode::DimensionMismatch, "factor mask out of range");
  std::vector<double> out(std::size_t{1} << std::popcount(mask), 0.0);
  for (std::size_t z = 0; z < joint_.size(); ++z) out[project_cell(z, mask, factor_count_)] += joint_[z];
  return out;
}

std::vector<double> WeightingScheme::averaging_weights(const SubsetIndex& subset) const {
  const std::uint32_t full = (1U << factor_count_) - 1U;
  return marginal(full & ~subset.mask());
}

double WeightingScheme::marginal_one(int k) const {
  if (k < 0 || k >= factor_count_) throw Error(ErrorCode::DimensionMismatch, "factor index out of range");
  return marginal(1U << k)[1];
}

std::vector<double> WeightingScheme::one_dimensional() const {
  std::vector<double> out;
  for (int k = 0; k < factor_count_; ++k) out.push_back(marginal_one(k));
  return out;
}

WeightingScheme from_joint(int factor_count, std::vector<double> mass, double tol) {
  if (factor_count < 1 || factor_count > kMaxFactors) {
    throw Error(ErrorCode::InvalidArgument, "factor count out of range");
  }
  if (mass.size() != (std::size_t{1} << factor_count)) {
    throw Error(ErrorCode::InvalidMass, "joint mass must have 2^K = " +
                                            std::to_string(std::size_t{1} << factor_count) +
                                            " entries, got " + std::to_string(mass.size()));
  }
  double total = 0.0;
  for (double w : mass) {
    if (!std::isfinite(w) || w < 0.0) throw Error(ErrorCode::InvalidMass, "joint mass must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > tol) {
    throw Error(ErrorCode::InvalidMass, "joint mass sums to " + std::to_string(total) + ", not 1");
  }
  return WeightingScheme(factor_count, std::move(mass));
}

WeightingScheme equal_scheme(int factor_count) {
  if (factor_count < 1 || factor_count > kMaxFactors) {
    throw Error(ErrorCode::InvalidArgument, "factor count out of range");
  }
  const std::size_t q = std::size_t{1} << factor_count;
  return from_joint(factor_count, std::vector<double>(q, 1.0 / static_cast<double>(q)));
}

WeightingScheme empirical_scheme(const CellSummary& summary) {
  const std::size_t q = summary.counts.size();
  if (q < 2 || !std::has_single_bit(q)) {
    throw Error(ErrorCode::DimensionMismatch, "cell count must be a power of two");
  }
  const std::size_t n = summary.unit_count();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empirical scheme needs at least one unit");
  std::vector<double> mass(q);
  for (std::size_t z = 0; z < q; ++z) {
    mass[z] = static_cast<double>(summary.counts[z]) / static_cast<double>(n);
  }
  return from_joint(std::countr_zero(q), std::move(mass), 1e-9);
}

WeightingScheme product_scheme(const ShiftVector& delta) {
  const int k_count = delta.size();
  const std::size_t q = std::size_t{1} << k_count;
  std::vector<double> mass(q);
  for (std::size_t z = 0; z < q; ++z) {
    double w = 1.0;
    for (int k = 0; k < k_count; ++k) w *= cell_level(z, k, k_count) ? delta[k] : 1.0 - delta[k];
    mass[z] = w;
  }
  return from_joint(k_count, std::move(mass), 1e-9);
}

WeightingScheme pi_cross(const WeightingScheme& scheme) {
  // Clamp guards against a marginal drifting a few ulps past 1.
  std::vector<double> p = scheme.one_dimensional();
  for (double& v : p) v = std::min(1.0, std::max(0.0, v));
  return product_scheme(ShiftVector(std::move(p)));
}

bool is_product(const WeightingScheme& scheme, double tol) {
  const auto p = scheme.one_dimensional();
  const int k_count = scheme.factor_count();
  for (std::size_t z = 0; z < scheme.cell_count(); ++z) {
    double w = 1.0;
    for (int k = 0; k < k_count; ++k) {
      w *= cell_level(z, k, k_count) ? p[static_cast<std::size_t>(k)] : 1.0 - p[static_cast<std::size_t>(k)];
    }
    if (std::abs(scheme.mass(z) - w) > tol) return false;
  }
  return true;
}

}  // namespace factorial
