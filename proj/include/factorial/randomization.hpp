#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "factorial/contrasts.hpp"
#include "factorial/design.hpp"
#include "factorial/potential_outcomes.hpp"
#include "factorial/regression.hpp"
#include "factorial/rng.hpp"
#include "factorial/verification.hpp"
#include "factorial/weighting.hpp"

namespace factorial {

/// Largest number of assignments enumerated exactly.
inline constexpr double kEnumerationLimit = 1e7;

/// Fixed cell sizes N_z of a completely randomized design.
class DesignSizes {
 public:
  explicit DesignSizes(std::vector<std::size_t> sizes);
  static DesignSizes balanced(int factor_count, std::size_t per_cell);

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  std::size_t operator[](std::size_t cell) const { return sizes_.at(cell); }
  std::size_t cell_count() const noexcept { return sizes_.size(); }
  int factor_count() const noexcept { return factor_count_; }
  std::size_t unit_count() const noexcept { return unit_count_; }
  std::vector<double> proportions() const;

 private:
  std::vector<std::size_t> sizes_;
  int factor_count_ = 0;
  std::size_t unit_count_ = 0;
};

/// Uniformly random cell for every unit: shuffle units, then hand the first
/// N_0 to cell 0, the next N_1 to cell 1, and so on.
std::vector<std::size_t> draw_assignment(const DesignSizes& sizes, SplitMix64& rng);

/// N! / prod N_z!, as a double (may be +inf).
double assignment_count(const DesignSizes& sizes);

/// Walks every distinct assignment once, in lexicographic order of the
/// per-unit cell vector.
class AssignmentEnumerator {
 public:
  /// Throws TooManyAssignments above `limit`.
  explicit AssignmentEnumerator(const DesignSizes& sizes, double limit = kEnumerationLimit);

  const std::vector<std::size_t>& current() const noexcept { return cells_; }
  /// Advances; false once every assignment has been visited.
  bool next();
  double count() const noexcept { return count_; }

 private:
  std::vector<std::size_t> cells_;
  double count_;
};

/// One replicate's output: a point estimate and, optionally, its estimated
/// covariance (empty matrix when the estimator has none).
struct EstimatorDraw {
  Eigen::VectorXd estimate;
  Eigen::MatrixXd covariance;
};

using Estimator = std::function<EstimatorDraw(const AssignmentTable&)>;

struct NamedEstimator {
  std::string name;
  std::vector<std::string> labels;
  Estimator fn;
  /// Estimand used for interval coverage; empty disables coverage.
  Eigen::VectorXd target;
};

/// Y_hat with V_hat; target Y_bar.
NamedEstimator cell_mean_estimator(const PotentialOutcomeTable& table);
/// G Y_hat with G V_hat G'; target G Y_bar.
NamedEstimator moment_effect_estimator(const PotentialOutcomeTable& table, const WeightingScheme& scheme);
/// Saturated shifted fit with HC0; target tau under the product scheme of delta.
NamedEstimator saturated_estimator(const PotentialOutcomeTable& table, const ShiftVector& delta);
/// Unsaturated fit with HC0; target the included entries of the product-scheme
/// effects.
NamedEstimator unsaturated_estimator(const PotentialOutcomeTable& table, const ModelSpec& spec);

struct EstimatorSummary {
  std::string name;
  std::vector<std::string> labels;
  Eigen::VectorXd target;
  Eigen::VectorXd mean;
  /// Exact mode divides by the number of assignments, Monte Carlo by reps - 1.
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd mean_estimated_covariance;
  Eigen::VectorXd coverage;
  /// sqrt(c (1 - c) / reps) per component in Monte Carlo mode, 0 when exact.
  Eigen::VectorXd coverage_mc_se;
};

struct SimReport {
  std::size_t replicates = 0;
  bool exact = false;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::vector<std::size_t> sizes;
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary& find(const std::string& name) const;
};

struct SimOptions {
  double alpha = 0.05;
  unsigned threads = 1;
};

SimReport exact_expectations(const PotentialOutcomeTable& table, const DesignSizes& sizes,
                             const std::vector<NamedEstimator>& estimators, const SimOptions& options = {});

/// Replicate r draws its assignment from SplitMix64(replicate_seed(seed, r)).
/// Replicates are reduced in fixed blocks combined in index order, so the
/// report does not depend on the thread count.
SimReport monte_carlo(const PotentialOutcomeTable& table, const DesignSizes& sizes,
                      const std::vector<NamedEstimator>& estimators, std::size_t reps, std::uint64_t seed,
                      const SimOptions& options = {});

// ---------------------------------------------------------------------------
// Populations

/// Y_i(z) = base[i] + offsets[z].
PotentialOutcomeTable make_constant_effects_population(const FactorSpec& spec, const Eigen::VectorXd& base,
                                                       const Eigen::VectorXd& offsets);
/// Random base outcomes on [-1, 1] and random cell offsets on [-2, 2].
PotentialOutcomeTable make_constant_effects_population(std::size_t n, int factor_count, std::uint64_t seed);

/// Unit effect plus unit-specific main and two-way slopes, nothing of order 3+.
PotentialOutcomeTable make_no_three_way_population(std::size_t n, int factor_count, std::uint64_t seed);

/// Constant-effects surface plus independent bounded noise of half-width
/// `noise` for every (unit, cell).
PotentialOutcomeTable make_heterogeneous_population(std::size_t n, int factor_count, std::uint64_t seed,
                                                    double noise = 1.0);

/// Adds coef * prod_{k in subset} z_k to every potential outcome.
PotentialOutcomeTable add_interaction(const PotentialOutcomeTable& table, const SubsetIndex& subset, double coef);

/// Observed data from a heterogeneous population under one random draw.
AssignmentTable random_dataset(const DesignSizes& sizes, std::uint64_t seed);

/// Random cell sizes with every N_z in [min_size, max_size].
DesignSizes random_sizes(int factor_count, std::size_t min_size, std::size_t max_size, SplitMix64& rng);

/// cov(Y_hat) = diag(S(z,z) / N_z) - S / N.
Eigen::MatrixXd cell_mean_covariance(const PotentialOutcomeTable& table, const DesignSizes& sizes);

// ---------------------------------------------------------------------------
// Saturated versus unsaturated

struct OrderingReport {
  Eigen::MatrixXd cov_saturated;    // exact cov of gamma_hat_+
  Eigen::MatrixXd cov_unsaturated;  // exact cov of gamma_tilde_+
  double min_eigenvalue = 0.0;      // of cov_saturated - cov_unsaturated
  bool ordered = false;             // min_eigenvalue >= -1e-9
  Eigen::MatrixXd d;
  VerificationRecord mean_formula;  // E = [I D] tau
  VerificationRecord cov_formula;   // cov = [I D] G cov(Y_hat) G' [I D]'
};

/// Matrix L with L[, included] = I and L[, omitted] = D, over canonical positions.
Eigen::MatrixXd included_map(const ModelSpec& spec, const Eigen::MatrixXd& d);

/// Closed-form covariances of gamma_hat_+ and gamma_tilde_+ under complete
/// randomization (no enumeration).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> closed_form_covariances(const PotentialOutcomeTable& table,
                                                                    const DesignSizes& sizes, const ModelSpec& spec);

OrderingReport compare_saturated_unsaturated(const PotentialOutcomeTable& table, const DesignSizes& sizes,
                                             const ModelSpec& spec);

struct Counterexample {
  PotentialOutcomeTable table;
  OrderingReport report;
  std::size_t attempt = 0;
};

/// Randomized search over heterogeneous populations for one where the
/// saturated covariance does not dominate; candidates are screened in closed
/// form and confirmed by enumeration.
std::optional<Counterexample> find_ordering_counterexample(const DesignSizes& sizes, const ModelSpec& spec,
                                                           std::uint64_t seed, std::size_t attempts = 200);

}  // namespace factorial
