#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "factorial/design.hpp"
#include "factorial/potential_outcomes.hpp"
#include "factorial/weighting.hpp"

namespace factorial {

/// Coefficients on the 2^K cell means of the conditional effect of the
/// factors in `subset`, holding the remaining factors at `other_levels`
/// (one 0/1 level per factor outside the subset, in factor order).
///
/// Built inductively: each factor added to the effect contributes
/// "level 1 minus level 0" of the lower-order effect. `order` fixes the
/// sequence in which members are added; empty means ascending factor order.
Eigen::VectorXd conditional_effect_row(const SubsetIndex& subset, std::span<const int> other_levels,
                                       int factor_count, std::span<const int> order = {});

/// Weighted average of the conditional effect rows of `subset` over the
/// levels of the other factors, weighted by the scheme's marginal law.
Eigen::VectorXd general_effect_row(const SubsetIndex& subset, const WeightingScheme& scheme);

struct ContrastMatrix {
  Eigen::MatrixXd rows;                // (2^K - 1) x 2^K
  std::vector<SubsetIndex> row_index;  // canonical subset order
  WeightingScheme scheme;
};

ContrastMatrix contrast_matrix(const WeightingScheme& scheme);

/// Factorial effects aligned with the canonical subset order.
struct EffectVector {
  Eigen::VectorXd values;
  std::vector<SubsetIndex> index;
};

EffectVector true_effects(const PotentialOutcomeTable& table, const WeightingScheme& scheme);

/// Rows of `matrix` selected by a list of canonical positions.
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& matrix, const std::vector<std::size_t>& rows);
Eigen::VectorXd select_entries(const Eigen::VectorXd& vector, const std::vector<std::size_t>& rows);

}  // namespace factorial
