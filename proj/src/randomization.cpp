#include "factorial/randomization.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "factorial/error.hpp"
#include "factorial/estimation.hpp"

namespace factorial {

// ---------------------------------------------------------------------------
// PotentialOutcomeTable

PotentialOutcomeTable::PotentialOutcomeTable(FactorSpec spec, Eigen::MatrixXd values)
    : spec_(std::move(spec)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.cols()) != spec_.cell_count()) {
    throw Error(ErrorCode::DimensionMismatch, "potential outcome table needs one column per cell");
  }
  if (values_.rows() < 2) throw Error(ErrorCode::InvalidArgument, "potential outcome table needs at least 2 units");
  if (!values_.allFinite()) throw Error(ErrorCode::InvalidArgument, "potential outcomes must be finite");
  means_ = values_.colwise().mean().transpose();
  const Eigen::MatrixXd centered = values_.rowwise() - means_.transpose();
  covariance_ = centered.transpose() * centered / static_cast<double>(values_.rows() - 1);
}

AssignmentTable PotentialOutcomeTable::observe(const std::vector<std::size_t>& cells) const {
  if (cells.size() != unit_count()) throw Error(ErrorCode::DimensionMismatch, "one cell per unit required");
  std::vector<double> y(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] >= cell_count()) throw Error(ErrorCode::DimensionMismatch, "cell index out of range");
    y[i] = (*this)(i, cells[i]);
  }
  return AssignmentTable(spec_, cells, std::move(y));
}

// ---------------------------------------------------------------------------
// Design sizes and assignments

DesignSizes::DesignSizes(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  const std::size_t q = sizes_.size();
  if (q < 2 || !std::has_single_bit(q) || q > (std::size_t{1} << kMaxFactors)) {
    throw Error(ErrorCode::InvalidArgument, "number of cell sizes must be 2^K with 1 <= K <= 16");
  }
  for (std::size_t z = 0; z < q; ++z) {
    if (sizes_[z] < 2) {
      throw Error(ErrorCode::InvalidArgument, "cell " + cell_label(z, std::countr_zero(q)) + " has N_z = " +
                                                  std::to_string(sizes_[z]) + " < 2");
    }
  }
  factor_count_ = std::countr_zero(q);
  unit_count_ = std::accumulate(sizes_.begin(), sizes_.end(), std::size_t{0});
}

DesignSizes DesignSizes::balanced(int factor_count, std::size_t per_cell) {
  return DesignSizes(std::vector<std::size_t>(std::size_t{1} << factor_count, per_cell));
}

std::vector<double> DesignSizes::proportions() const {
  std::vector<double> e(sizes_.size());
  for (std::size_t z = 0; z < e.size(); ++z) e[z] = static_cast<double>(sizes_[z]) / static_cast<double>(unit_count_);
  return e;
}

std::vector<std::size_t> draw_assignment(const DesignSizes& sizes, SplitMix64& rng) {
  const std::size_t n = sizes.unit_count();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.bounded(i)]);
  std::vector<std::size_t> cells(n);
  std::size_t pos = 0;
  for (std::size_t z = 0; z < sizes.cell_count(); ++z) {
    for (std::size_t j = 0; j < sizes[z]; ++j) cells[order[pos++]] = z;
  }
  return cells;
}

double assignment_count(const DesignSizes& sizes) {
  // product over cells of C(remaining, N_z)
  double count = 1.0;
  std::size_t remaining = sizes.unit_count();
  for (std::size_t z = 0; z < sizes.cell_count(); ++z) {
    const std::size_t k = sizes[z];
    for (std::size_t j = 1; j <= k; ++j) {
      count *= static_cast<double>(remaining - k + j) / static_cast<double>(j);
    }
    remaining -= k;
  }
  return std::round(count);
}

AssignmentEnumerator::AssignmentEnumerator(const DesignSizes& sizes, double limit) : count_(assignment_count(sizes)) {
  if (count_ > limit) {
    throw Error(ErrorCode::TooManyAssignments, "design has " + std::to_string(count_) +
                                                   " assignments, above the enumeration limit " +
                                                   std::to_string(limit));
  }
  for (std::size_t z = 0; z < sizes.cell_count(); ++z) cells_.insert(cells_.end(), sizes[z], z);
}

bool AssignmentEnumerator::next() { return std::next_permutation(cells_.begin(), cells_.end()); }

// ---------------------------------------------------------------------------
// Estimators

namespace {

std::vector<std::string> cell_labels(int k) {
  std::vector<std::string> out;
  for (std::size_t z = 0; z < (std::size_t{1} << k); ++z) out.push_back(cell_label(z, k));
  return out;
}

std::vector<std::string> subset_labels(const FactorSpec& spec, const std::vector<SubsetIndex>& subsets) {
  std::vector<std::string> out;
  for (const auto& s : subsets) out.push_back(s.label(spec));
  return out;
}

std::vector<std::size_t> included_positions(const ModelSpec& spec) {
  const auto pos = canonical_positions(spec.factor_count());
  std::vector<std::size_t> out;
  for (const auto& t : spec.terms()) out.push_back(pos[t.mask()]);
  return out;
}

Eigen::MatrixXd principal_block(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx) {
  return select_rows(select_rows(m, idx).transpose(), idx);
}

}  // namespace

NamedEstimator cell_mean_estimator(const PotentialOutcomeTable& table) {
  return {"cell_means", cell_labels(table.factor_count()),
          [](const AssignmentTable& data) {
            auto m = moment_estimates(data);
            return EstimatorDraw{std::move(m.y_hat), std::move(m.v_hat)};
          },
          table.means()};
}

NamedEstimator moment_effect_estimator(const PotentialOutcomeTable& table, const WeightingScheme& scheme) {
  auto g = contrast_matrix(scheme);
  Eigen::VectorXd target = g.rows * table.means();
  return {"moment_effects", subset_labels(table.spec(), g.row_index),
          [g = std::move(g.rows)](const AssignmentTable& data) {
            const auto m = moment_estimates(data);
            return EstimatorDraw{g * m.y_hat, g * m.v_hat * g.transpose()};
          },
          std::move(target)};
}

NamedEstimator saturated_estimator(const PotentialOutcomeTable& table, const ShiftVector& delta) {
  const auto g = contrast_matrix(product_scheme(delta));
  auto spec = ModelSpec::saturated(delta);
  return {"saturated", subset_labels(table.spec(), g.row_index),
          [spec](const AssignmentTable& data) {
            const auto design = build_design(data, spec);
            const Eigen::VectorXd y =
                Eigen::Map<const Eigen::VectorXd>(data.outcomes().data(), static_cast<Eigen::Index>(data.unit_count()));
            const auto fit = ols_fit(design.full, y);
            return EstimatorDraw{fit.terms(), fit.robust_cov()};
          },
          g.rows * table.means()};
}

NamedEstimator unsaturated_estimator(const PotentialOutcomeTable& table, const ModelSpec& spec) {
  const auto g = contrast_matrix(product_scheme(spec.delta()));
  const Eigen::VectorXd tau = g.rows * table.means();
  return {"unsaturated", subset_labels(table.spec(), spec.terms()),
          [spec](const AssignmentTable& data) {
            const auto fit = unsaturated_fit(data, spec);
            return EstimatorDraw{fit.terms(), fit.robust_cov()};
          },
          select_entries(tau, included_positions(spec))};
}

// ---------------------------------------------------------------------------
// Reduction

namespace {

constexpr std::size_t kBlockSize = 512;

struct Partial {
  std::vector<Eigen::VectorXd> sum;
  std::vector<Eigen::MatrixXd> outer;
  std::vector<Eigen::MatrixXd> est_cov;
  std::vector<Eigen::VectorXd> covered;
  std::vector<bool> has_cov;
  std::size_t count = 0;
  std::size_t failures = 0;
};

class Reducer {
 public:
  Reducer(const std::vector<NamedEstimator>& estimators, double crit)
      : estimators_(estimators), crit_(crit) {}

  void set_shift(std::vector<Eigen::VectorXd> shift) { shift_ = std::move(shift); }

  Partial empty() const {
    Partial p;
    for (std::size_t e = 0; e < estimators_.size(); ++e) {
      const auto d = shift_[e].size();
      p.sum.push_back(Eigen::VectorXd::Zero(d));
      p.outer.push_back(Eigen::MatrixXd::Zero(d, d));
      p.est_cov.push_back(Eigen::MatrixXd::Zero(d, d));
      p.covered.push_back(Eigen::VectorXd::Zero(d));
      p.has_cov.push_back(true);
    }
    return p;
  }

  void add(const AssignmentTable& data, Partial& p) const {
    std::vector<EstimatorDraw> draws;
    draws.reserve(estimators_.size());
    try {
      for (const auto& e : estimators_) draws.push_back(e.fn(data));
    } catch (const Error&) {
      ++p.failures;
      return;
    }
    for (std::size_t e = 0; e < estimators_.size(); ++e) {
      const auto& d = draws[e];
      if (d.estimate.size() != shift_[e].size()) {
        throw Error(ErrorCode::DimensionMismatch, "estimator " + estimators_[e].name + " changed output length");
      }
      const Eigen::VectorXd x = d.estimate - shift_[e];
      p.sum[e] += x;
      p.outer[e].noalias() += x * x.transpose();
      if (d.covariance.size() == 0) {
        p.has_cov[e] = false;
        continue;
      }
      p.est_cov[e] += d.covariance;
      const auto& t = estimators_[e].target;
      if (t.size() == d.estimate.size()) {
        for (Eigen::Index j = 0; j < t.size(); ++j) {
          const double half = crit_ * std::sqrt(std::max(d.covariance(j, j), 0.0));
          if (std::abs(d.estimate[j] - t[j]) <= half) p.covered[e][j] += 1.0;
        }
      }
    }
    ++p.count;
  }

  static void merge(Partial& into, const Partial& from) {
    for (std::size_t e = 0; e < into.sum.size(); ++e) {
      into.sum[e] += from.sum[e];
      into.outer[e] += from.outer[e];
      into.est_cov[e] += from.est_cov[e];
      into.covered[e] += from.covered[e];
      into.has_cov[e] = into.has_cov[e] && from.has_cov[e];
    }
    into.count += from.count;
    into.failures += from.failures;
  }

  void finish(const Partial& p, bool exact, SimReport& report) const {
    if (p.failures > 0) {
      throw Error(ErrorCode::EstimatorFailure, std::to_string(p.failures) + " of " +
                                                   std::to_string(p.failures + p.count) +
                                                   (exact ? " assignments" : " replicates") +
                                                   " produced no estimate; expectations are undefined");
    }
    const auto n = static_cast<double>(p.count);
    report.replicates = p.count;
    report.exact = exact;
    for (std::size_t e = 0; e < estimators_.size(); ++e) {
      EstimatorSummary s;
      s.name = estimators_[e].name;
      s.labels = estimators_[e].labels;
      s.target = estimators_[e].target;
      const Eigen::VectorXd m = p.sum[e] / n;
      s.mean = shift_[e] + m;
      const Eigen::MatrixXd centered = p.outer[e] - n * m * m.transpose();
      if (exact) {
        s.covariance = centered / n;
      } else if (p.count > 1) {
        s.covariance = centered / (n - 1.0);
      } else {
        s.covariance = Eigen::MatrixXd::Zero(m.size(), m.size());
      }
      s.covariance = 0.5 * (s.covariance + s.covariance.transpose()).eval();
      if (p.has_cov[e]) {
        s.mean_estimated_covariance = p.est_cov[e] / n;
        if (s.target.size() == s.mean.size()) {
          s.coverage = p.covered[e] / n;
          s.coverage_mc_se = exact ? Eigen::VectorXd::Zero(m.size())
                                   : Eigen::VectorXd((s.coverage.array() * (1.0 - s.coverage.array()) / n).sqrt());
        }
      }
      report.estimators.push_back(std::move(s));
    }
  }

 private:
  const std::vector<NamedEstimator>& estimators_;
  double crit_;
  std::vector<Eigen::VectorXd> shift_;
};

std::vector<Eigen::VectorXd> first_estimates(const std::vector<NamedEstimator>& estimators,
                                             const AssignmentTable& data) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& e : estimators) {
    try {
      out.push_back(e.fn(data).estimate);
    } catch (const Error&) {
      out.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(e.labels.size())));
    }
  }
  return out;
}

void check_inputs(const PotentialOutcomeTable& table, const DesignSizes& sizes,
                  const std::vector<NamedEstimator>& estimators, const SimOptions& options) {
  if (sizes.unit_count() != table.unit_count() || sizes.cell_count() != table.cell_count()) {
    throw Error(ErrorCode::DimensionMismatch, "design sizes do not match the population table");
  }
  if (estimators.empty()) throw Error(ErrorCode::InvalidArgument, "no estimators given");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1)");
}

}  // namespace

const EstimatorSummary& SimReport::find(const std::string& name) const {
  for (const auto& e : estimators) {
    if (e.name == name) return e;
  }
  throw Error(ErrorCode::InvalidArgument, "no estimator named " + name);
}

SimReport exact_expectations(const PotentialOutcomeTable& table, const DesignSizes& sizes,
                             const std::vector<NamedEstimator>& estimators, const SimOptions& options) {
  check_inputs(table, sizes, estimators, options);
  AssignmentEnumerator it(sizes);
  Reducer reducer(estimators, normal_quantile(1.0 - options.alpha / 2.0));
  reducer.set_shift(first_estimates(estimators, table.observe(it.current())));
  Partial total = reducer.empty();
  Partial block = reducer.empty();
  std::size_t in_block = 0;
  do {
    reducer.add(table.observe(it.current()), block);
    if (++in_block == kBlockSize) {
      Reducer::merge(total, block);
      block = reducer.empty();
      in_block = 0;
    }
  } while (it.next());
  Reducer::merge(total, block);

  SimReport report;
  report.alpha = options.alpha;
  report.sizes = sizes.sizes();
  reducer.finish(total, /*exact=*/true, report);
  return report;
}

SimReport monte_carlo(const PotentialOutcomeTable& table, const DesignSizes& sizes,
                      const std::vector<NamedEstimator>& estimators, std::size_t reps, std::uint64_t seed,
                      const SimOptions& options) {
  check_inputs(table, sizes, estimators, options);
  if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be at least 1");
  Reducer reducer(estimators, normal_quantile(1.0 - options.alpha / 2.0));
  const auto draw = [&](std::size_t r) {
    SplitMix64 rng(replicate_seed(seed, r));
    return table.observe(draw_assignment(sizes, rng));
  };
  reducer.set_shift(first_estimates(estimators, draw(0)));

  const std::size_t blocks = (reps + kBlockSize - 1) / kBlockSize;
  std::vector<Partial> partials(blocks);
  std::atomic<std::size_t> next_block{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (std::size_t b = next_block++; b < blocks; b = next_block++) {
      try {
        Partial p = reducer.empty();
        const std::size_t end = std::min(reps, (b + 1) * kBlockSize);
        for (std::size_t r = b * kBlockSize; r < end; ++r) reducer.add(draw(r), p);
        partials[b] = std::move(p);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next_block = blocks;
      }
    }
  };
  const unsigned threads = std::max(1U, std::min<unsigned>(options.threads, static_cast<unsigned>(blocks)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  Partial total = reducer.empty();
  for (const auto& p : partials) Reducer::merge(total, p);
  SimReport report;
  report.seed = seed;
  report.alpha = options.alpha;
  report.sizes = sizes.sizes();
  reducer.finish(total, /*exact=*/false, report);
  return report;
}

// ---------------------------------------------------------------------------
// Populations

namespace {

double symmetric(SplitMix64& rng, double half_width) { return half_width * (2.0 * rng.uniform() - 1.0); }

double level_product(std::size_t cell, std::uint32_t mask, int k) {
  double v = 1.0;
  for (int f = 0; f < k; ++f) {
    if ((mask >> f) & 1U) v *= cell_level(cell, f, k);
  }
  return v;
}

}  // namespace

PotentialOutcomeTable make_constant_effects_population(const FactorSpec& spec, const Eigen::VectorXd& base,
                                                       const Eigen::VectorXd& offsets) {
  if (static_cast<std::size_t>(offsets.size()) != spec.cell_count()) {
    throw Error(ErrorCode::DimensionMismatch, "need one offset per cell");
  }
  Eigen::MatrixXd v = base.replicate(1, offsets.size());
  v.rowwise() += offsets.transpose();
  return PotentialOutcomeTable(spec, std::move(v));
}

PotentialOutcomeTable make_constant_effects_population(std::size_t n, int factor_count, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const auto spec = FactorSpec::with_default_labels(factor_count);
  Eigen::VectorXd base(static_cast<Eigen::Index>(n));
  for (auto& b : base) b = symmetric(rng, 1.0);
  Eigen::VectorXd offsets(static_cast<Eigen::Index>(spec.cell_count()));
  for (auto& o : offsets) o = symmetric(rng, 2.0);
  return make_constant_effects_population(spec, base, offsets);
}

PotentialOutcomeTable make_no_three_way_population(std::size_t n, int factor_count, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const auto spec = FactorSpec::with_default_labels(factor_count);
  const std::size_t q = spec.cell_count();
  const auto k = static_cast<std::size_t>(factor_count);
  std::vector<double> main_center(k);
  std::vector<double> pair_center(k * k);
  for (auto& c : main_center) c = symmetric(rng, 2.0);
  for (auto& c : pair_center) c = symmetric(rng, 1.0);
  Eigen::MatrixXd v(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
  std::vector<double> a(k);
  std::vector<double> b(k * k);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = symmetric(rng, 1.0);
    for (std::size_t f = 0; f < k; ++f) a[f] = main_center[f] + symmetric(rng, 0.5);
    for (std::size_t f = 0; f < k * k; ++f) b[f] = pair_center[f] + symmetric(rng, 0.5);
    for (std::size_t z = 0; z < q; ++z) {
      double y = u;
      for (int f = 0; f < factor_count; ++f) {
        const int zf = cell_level(z, f, factor_count);
        y += a[static_cast<std::size_t>(f)] * zf;
        for (int g = f + 1; g < factor_count; ++g) {
          y += b[static_cast<std::size_t>(f) * k + static_cast<std::size_t>(g)] * zf * cell_level(z, g, factor_count);
        }
      }
      v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(z)) = y;
    }
  }
  return PotentialOutcomeTable(spec, std::move(v));
}

PotentialOutcomeTable make_heterogeneous_population(std::size_t n, int factor_count, std::uint64_t seed,
                                                    double noise) {
  const auto base = make_constant_effects_population(n, factor_count, seed);
  SplitMix64 rng(replicate_seed(seed, 0x6e6f697365ULL));
  Eigen::MatrixXd v = base.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index z = 0; z < v.cols(); ++z) v(i, z) += symmetric(rng, noise);
  }
  return PotentialOutcomeTable(base.spec(), std::move(v));
}

PotentialOutcomeTable add_interaction(const PotentialOutcomeTable& table, const SubsetIndex& subset, double coef) {
  const int k = table.factor_count();
  if ((subset.mask() >> k) != 0U) throw Error(ErrorCode::DimensionMismatch, "interaction refers to a factor beyond K");
  Eigen::MatrixXd v = table.values();
  for (Eigen::Index z = 0; z < v.cols(); ++z) {
    v.col(z).array() += coef * level_product(static_cast<std::size_t>(z), subset.mask(), k);
  }
  return PotentialOutcomeTable(table.spec(), std::move(v));
}

AssignmentTable random_dataset(const DesignSizes& sizes, std::uint64_t seed) {
  const auto table = make_heterogeneous_population(sizes.unit_count(), sizes.factor_count(), seed);
  SplitMix64 rng(replicate_seed(seed, 0x61737369676eULL));
  return table.observe(draw_assignment(sizes, rng));
}

DesignSizes random_sizes(int factor_count, std::size_t min_size, std::size_t max_size, SplitMix64& rng) {
  if (min_size > max_size) throw Error(ErrorCode::InvalidArgument, "min_size exceeds max_size");
  std::vector<std::size_t> sizes(std::size_t{1} << factor_count);
  for (auto& s : sizes) s = min_size + rng.bounded(max_size - min_size + 1);
  return DesignSizes(std::move(sizes));
}

Eigen::MatrixXd cell_mean_covariance(const PotentialOutcomeTable& table, const DesignSizes& sizes) {
  const auto& s = table.covariance();
  Eigen::MatrixXd out = -s / static_cast<double>(sizes.unit_count());
  for (Eigen::Index z = 0; z < s.rows(); ++z) out(z, z) += s(z, z) / static_cast<double>(sizes[static_cast<std::size_t>(z)]);
  return out;
}

// ---------------------------------------------------------------------------
// Saturated versus unsaturated

Eigen::MatrixXd included_map(const ModelSpec& spec, const Eigen::MatrixXd& d) {
  const auto pos = canonical_positions(spec.factor_count());
  const auto omitted = spec.omitted_terms();
  const auto q1 = static_cast<Eigen::Index>((std::size_t{1} << spec.factor_count()) - 1);
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.terms().size()), q1);
  for (std::size_t j = 0; j < spec.terms().size(); ++j) {
    l(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(pos[spec.terms()[j].mask()])) = 1.0;
    for (std::size_t m = 0; m < omitted.size(); ++m) {
      l(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(pos[omitted[m].mask()])) =
          d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m));
    }
  }
  return l;
}

namespace {

Eigen::MatrixXd design_d(const DesignSizes& sizes, const ModelSpec& spec) {
  const Eigen::MatrixXd phi = phi_from_proportions(sizes.proportions(), spec);
  return phi.bottomRows(phi.rows() - 1);
}

}  // namespace

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> closed_form_covariances(const PotentialOutcomeTable& table,
                                                                    const DesignSizes& sizes, const ModelSpec& spec) {
  const Eigen::MatrixXd g = contrast_matrix(product_scheme(spec.delta())).rows;
  const Eigen::MatrixXd c = g * cell_mean_covariance(table, sizes) * g.transpose();
  const Eigen::MatrixXd l = included_map(spec, design_d(sizes, spec));
  return {principal_block(c, included_positions(spec)), l * c * l.transpose()};
}

OrderingReport compare_saturated_unsaturated(const PotentialOutcomeTable& table, const DesignSizes& sizes,
                                             const ModelSpec& spec) {
  const auto report = exact_expectations(
      table, sizes, {saturated_estimator(table, spec.delta()), unsaturated_estimator(table, spec)});
  const auto& sat = report.find("saturated");
  const auto& uns = report.find("unsaturated");

  OrderingReport out;
  out.cov_saturated = principal_block(sat.covariance, included_positions(spec));
  out.cov_unsaturated = uns.covariance;
  const Eigen::MatrixXd diff = out.cov_saturated - out.cov_unsaturated;
  out.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (diff + diff.transpose()))
                           .eigenvalues()
                           .minCoeff();
  out.ordered = out.min_eigenvalue >= -1e-9;
  out.d = design_d(sizes, spec);

  const Eigen::MatrixXd g = contrast_matrix(product_scheme(spec.delta())).rows;
  const Eigen::MatrixXd l = included_map(spec, out.d);
  out.mean_formula = make_record("unsaturated mean equals [I D] tau", uns.mean, l * g * table.means(), 1e-9, 1.0);
  out.cov_formula = make_record("unsaturated covariance equals [I D] G cov(Y_hat) G' [I D]'", uns.covariance,
                                l * g * cell_mean_covariance(table, sizes) * g.transpose() * l.transpose(), 1e-9, 1.0);
  return out;
}

std::optional<Counterexample> find_ordering_counterexample(const DesignSizes& sizes, const ModelSpec& spec,
                                                           std::uint64_t seed, std::size_t attempts) {
  const auto omitted = spec.omitted_terms();
  for (std::size_t a = 0; a < attempts; ++a) {
    const std::uint64_t s = replicate_seed(seed, a);
    SplitMix64 rng(s);
    // Unit-specific slopes on the omitted terms make effects vary across units.
    Eigen::MatrixXd v = make_heterogeneous_population(sizes.unit_count(), sizes.factor_count(), s,
                                                      0.1 + 2.0 * rng.uniform())
                            .values();
    for (const auto& t : omitted) {
      for (Eigen::Index i = 0; i < v.rows(); ++i) {
        const double slope = symmetric(rng, 4.0);
        for (Eigen::Index z = 0; z < v.cols(); ++z) {
          v(i, z) += slope * level_product(static_cast<std::size_t>(z), t.mask(), sizes.factor_count());
        }
      }
    }
    PotentialOutcomeTable table(FactorSpec::with_default_labels(sizes.factor_count()), std::move(v));
    const auto [sat, uns] = closed_form_covariances(table, sizes, spec);
    const Eigen::MatrixXd diff = sat - uns;
    const double lambda =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (diff + diff.transpose())).eigenvalues().minCoeff();
    if (lambda >= -1e-6) continue;
    auto report = compare_saturated_unsaturated(table, sizes, spec);
    if (!report.ordered) return Counterexample{std::move(table), std::move(report), a};
  }
  return std::nullopt;
}

}  // namespace factorial
