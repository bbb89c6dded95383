#include "factorial/contrasts.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "factorial/error.hpp"

namespace factorial {

namespace {

// Adds `weight` times the conditional effect of order[0..count) anchored at
// `base` (members unset, all other factors fixed) into `out`.
void accumulate_effect(std::span<const int> order, std::size_t count, std::size_t base, double weight,
                       int factor_count, Eigen::VectorXd& out) {
  if (count == 0) {
    out[static_cast<Eigen::Index>(base)] += weight;
    return;
  }
  const int newest = order[count - 1];
  const std::size_t bit = std::size_t{1} << (factor_count - 1 - newest);
  accumulate_effect(order, count - 1, base | bit, weight, factor_count, out);
  accumulate_effect(order, count - 1, base, -weight, factor_count, out);
}

// Cell with the subset's members at 0 and the other factors at the levels
// encoded by `sub` (binary counting over the non-members).
std::size_t anchor_cell(std::uint32_t members, std::size_t sub, int factor_count) {
  const int others = factor_count - std::popcount(members);
  std::size_t cell = 0;
  int j = 0;
  for (int k = 0; k < factor_count; ++k) {
    cell <<= 1;
    if (!((members >> k) & 1U)) {
      cell |= (sub >> (others - 1 - j)) & 1U;
      ++j;
    }
  }
  return cell;
}

}  // namespace

Eigen::VectorXd conditional_effect_row(const SubsetIndex& subset, std::span<const int> other_levels,
                                       int factor_count, std::span<const int> order) {
  if (factor_count < 1 || factor_count > kMaxFactors) {
    throw Error(ErrorCode::DimensionMismatch, "factor count out of range");
  }
  if ((subset.mask() >> factor_count) != 0U) {
    throw Error(ErrorCode::DimensionMismatch, "subset refers to a factor beyond K");
  }
  const int others = factor_count - subset.size();
  if (static_cast<int>(other_levels.size()) != others) {
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(others) +
                                                  " levels for the remaining factors, got " +
                                                  std::to_string(other_levels.size()));
  }
  std::size_t sub = 0;
  for (int v : other_levels) {
    if (v != 0 && v != 1) throw Error(ErrorCode::DimensionMismatch, "levels must be 0 or 1");
    sub = (sub << 1) | static_cast<std::size_t>(v);
  }

  const std::vector<int> members = subset.members();
  std::vector<int> sequence(order.begin(), order.end());
  if (sequence.empty()) {
    sequence = members;
  } else {
    std::vector<int> sorted = sequence;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != members) throw Error(ErrorCode::DimensionMismatch, "order must permute the subset");
  }

  Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(std::size_t{1} << factor_count));
  accumulate_effect(sequence, sequence.size(), anchor_cell(subset.mask(), sub, factor_count), 1.0,
                    factor_count, row);
  return row;
}

Eigen::VectorXd general_effect_row(const SubsetIndex& subset, const WeightingScheme& scheme) {
  const int factor_count = scheme.factor_count();
  if ((subset.mask() >> factor_count) != 0U) {
    throw Error(ErrorCode::DimensionMismatch, "subset refers to a factor beyond K");
  }
  const auto weights = scheme.averaging_weights(subset);
  const auto members = subset.members();
  Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(scheme.cell_count()));
  for (std::size_t sub = 0; sub < weights.size(); ++sub) {
    if (weights[sub] == 0.0) continue;
    accumulate_effect(members, members.size(), anchor_cell(subset.mask(), sub, factor_count), weights[sub],
                      factor_count, row);
  }
  return row;
}

ContrastMatrix contrast_matrix(const WeightingScheme& scheme) {
  auto subsets = canonical_subsets(scheme.factor_count());
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(subsets.size()), static_cast<Eigen::Index>(scheme.cell_count()));
  for (std::size_t j = 0; j < subsets.size(); ++j) {
    rows.row(static_cast<Eigen::Index>(j)) = general_effect_row(subsets[j], scheme).transpose();
  }
  return ContrastMatrix{std::move(rows), std::move(subsets), scheme};
}

EffectVector true_effects(const PotentialOutcomeTable& table, const WeightingScheme& scheme) {
  if (table.factor_count() != scheme.factor_count()) {
    throw Error(ErrorCode::DimensionMismatch, "table and scheme disagree on the number of factors");
  }
  auto g = contrast_matrix(scheme);
  return EffectVector{g.rows * table.means(), std::move(g.row_index)};
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& matrix, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), matrix.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = matrix.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

Eigen::VectorXd select_entries(const Eigen::VectorXd& vector, const std::vector<std::size_t>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out[static_cast<Eigen::Index>(r)] = vector[static_cast<Eigen::Index>(rows[r])];
  }
  return out;
}

}  // namespace factorial
