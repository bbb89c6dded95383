#include "factorial/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "factorial/contrasts.hpp"
#include "factorial/estimation.hpp"
#include "factorial/identities.hpp"
#include "factorial/randomization.hpp"
#include "factorial/regression.hpp"
#include "factorial/serialize.hpp"

#ifndef FACTORIAL_VERSION
#define FACTORIAL_VERSION "0.0.0"
#endif

namespace factorial {

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::RankDeficient:
    case ErrorCode::TooManyAssignments:
    case ErrorCode::EstimatorFailure:
      return kExitNumerical;
    case ErrorCode::IdentityViolation:
      return kExitIdentity;
    default:
      return kExitValidation;
  }
}

namespace {

struct Outcome {
  Json body;
  bool identities_pass = true;
};

Json config_json(const RunConfig& c) {
  Json j{{"command", c.command}, {"alpha", c.alpha}, {"seed", c.seed}};
  if (!c.input.empty()) j["input"] = c.input;
  if (!c.factors.empty()) j["factors"] = c.factors;
  if (c.command == "analyze") {
    j["outcome_col"] = c.outcome_column;
    j["scheme"] = c.scheme;
  }
  if (c.delta) j["delta"] = *c.delta;
  if (!c.model.empty()) j["model"] = c.model;
  if (c.tol) j["tol"] = *c.tol;
  if (c.command == "simulate") {
    j["population"] = c.population;
    j["sizes"] = c.sizes;
    j["scheme"] = c.scheme;
    j["noise"] = c.noise;
    if (c.reps) j["reps"] = *c.reps;
    j["exact"] = c.exact;
    j["allow_mc"] = c.allow_mc;
    j["threads"] = c.threads;
  }
  if (c.command == "verify") {
    j["K"] = c.k;
    j["balanced"] = c.balanced;
    j["per_cell"] = c.per_cell;
    if (c.perturb != 0.0) j["perturb"] = c.perturb;
  }
  return j;
}

void apply_tolerance(std::vector<VerificationRecord>& records, const std::optional<double>& tol) {
  if (!tol) return;
  for (auto& r : records) {
    r.tolerance = *tol;
    r.pass = r.max_rel_err <= *tol;
  }
}

bool all_pass(const std::vector<VerificationRecord>& records) {
  return std::all_of(records.begin(), records.end(), [](const auto& r) { return r.pass; });
}

std::vector<std::string> header_factors(const std::string& path, const std::string& outcome) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path + " is empty");
  std::vector<std::string> out;
  for (auto& h : split_csv_record(line)) {
    if (h != outcome) out.push_back(h);
  }
  return out;
}

ShiftVector resolve_delta(const RunConfig& c, const WeightingScheme& scheme) {
  if (!c.delta) return ShiftVector(scheme.one_dimensional());
  if (static_cast<int>(c.delta->size()) != scheme.factor_count()) {
    throw Error(ErrorCode::DimensionMismatch, "--delta needs " + std::to_string(scheme.factor_count()) + " values");
  }
  return ShiftVector(*c.delta);
}

std::vector<std::string> labels_of(const FactorSpec& spec, const std::vector<SubsetIndex>& s) {
  std::vector<std::string> out;
  for (const auto& t : s) out.push_back(t.label(spec));
  return out;
}

// ---------------------------------------------------------------------------

Outcome analyze(const RunConfig& c) {
  if (c.input.empty()) throw Error(ErrorCode::InvalidArgument, "analyze needs --input");
  const auto factors = c.factors.empty() ? header_factors(c.input, c.outcome_column) : c.factors;
  const FactorSpec spec(factors);
  const auto data = ingest_csv(c.input, spec, c.outcome_column);
  const auto summary = cell_summary(data, SummaryNeeds::Variances);
  const auto scheme = resolve_scheme(c.scheme, spec, &summary);
  const auto delta = resolve_delta(c, scheme);

  const auto moment = effect_estimates(data, scheme, c.alpha);
  auto sat = saturated_fit(data, delta, /*throw_on_violation=*/false);
  apply_tolerance(sat.checks, c.tol);

  Outcome o;
  o.body["scheme"] = scheme_to_json(scheme, spec);
  o.body["delta"] = delta.values();
  o.body["scheme_is_product"] = is_product(scheme);
  o.body["moment"] = to_json(moment);
  o.body["regression"] = {{"saturated", to_json(sat.fit)}};
  auto records = sat.checks;

  if (!c.model.empty()) {
    const ModelSpec model(delta, parse_terms(c.model, spec));
    const auto fit = unsaturated_fit(data, model);
    Json u = to_json(fit);
    if (!model.is_saturated()) {
      auto rel = verify_omitted_relation(data, model);
      std::vector<VerificationRecord> extra{rel.relation, rel.criterion};
      apply_tolerance(extra, c.tol);
      rel.relation = extra[0];
      rel.criterion = extra[1];
      u["omitted_terms"] = to_json(rel, labels_of(spec, model.terms()), labels_of(spec, model.omitted_terms()));
      records.insert(records.end(), extra.begin(), extra.end());
    }
    o.body["regression"]["unsaturated"] = u;
  }
  o.body["verification"] = to_json(records);
  o.identities_pass = all_pass(records);
  return o;
}

// ---------------------------------------------------------------------------

PotentialOutcomeTable simulate_population(const RunConfig& c, const DesignSizes& sizes) {
  const int k = sizes.factor_count();
  const std::size_t n = sizes.unit_count();
  if (c.population == "constant") return make_constant_effects_population(n, k, c.seed);
  if (c.population == "heterogeneous") return make_heterogeneous_population(n, k, c.seed, c.noise);
  if (c.population == "no-three-way") return make_no_three_way_population(n, k, c.seed);
  if (c.population.size() > 4 && c.population.substr(c.population.size() - 4) == ".csv") {
    std::ifstream in(c.population);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open population file " + c.population);
    const auto spec = c.factors.empty() ? FactorSpec::with_default_labels(k) : FactorSpec(c.factors);
    auto table = read_population_csv(in, spec);
    if (table.unit_count() != n) {
      throw Error(ErrorCode::DimensionMismatch, "population has " + std::to_string(table.unit_count()) +
                                                    " units but sizes sum to " + std::to_string(n));
    }
    return table;
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown population '" + c.population + "' (constant, heterogeneous, no-three-way or a .csv file)");
}

Outcome simulate(const RunConfig& c, std::ostream& err) {
  if (c.sizes.empty()) throw Error(ErrorCode::InvalidArgument, "simulate needs --sizes");
  const DesignSizes sizes(c.sizes);
  if (c.n && *c.n != sizes.unit_count()) {
    throw Error(ErrorCode::InvalidArgument, "--N " + std::to_string(*c.n) + " differs from the sum of --sizes");
  }
  auto table = simulate_population(c, sizes);
  if (!c.factors.empty()) table = PotentialOutcomeTable(FactorSpec(c.factors), table.values());
  const auto& spec = table.spec();
  const auto scheme = resolve_scheme(c.scheme, spec);
  const auto delta = resolve_delta(c, scheme);

  std::vector<NamedEstimator> estimators{cell_mean_estimator(table), moment_effect_estimator(table, scheme),
                                         saturated_estimator(table, delta)};
  std::optional<ModelSpec> model;
  if (!c.model.empty()) {
    model.emplace(delta, parse_terms(c.model, spec));
    estimators.push_back(unsaturated_estimator(table, *model));
  }

  const double count = assignment_count(sizes);
  bool exact = c.exact || (!c.reps && count <= kEnumerationLimit);
  if (exact && count > kEnumerationLimit) {
    if (!c.allow_mc) {
      throw Error(ErrorCode::TooManyAssignments, "design has " + std::to_string(count) +
                                                     " assignments; pass --allow-mc to fall back to Monte Carlo");
    }
    err << "warning: " << count << " assignments exceed the enumeration limit; using Monte Carlo\n";
    exact = false;
  }
  if (!exact && !c.reps && !c.allow_mc) {
    throw Error(ErrorCode::TooManyAssignments, "enumeration infeasible; pass --reps or --allow-mc");
  }
  const SimOptions options{c.alpha, c.threads};
  const auto report = exact ? exact_expectations(table, sizes, estimators, options)
                            : monte_carlo(table, sizes, estimators, c.reps.value_or(10000), c.seed, options);

  Outcome o;
  o.body["population"] = {{"source", c.population}, {"N", table.unit_count()}, {"K", spec.size()}};
  o.body["delta"] = delta.values();
  o.body["simulation"] = to_json(report);
  std::vector<VerificationRecord> records;
  if (exact) {
    const auto& ym = report.find("cell_means");
    const Eigen::MatrixXd cov_y = cell_mean_covariance(table, sizes);
    const double scale = table.values().cwiseAbs().maxCoeff();
    const double var_scale = table.covariance().cwiseAbs().maxCoeff();
    const double n = static_cast<double>(sizes.unit_count());
    records.push_back(make_record("cell means unbiased", ym.mean, table.means(), 1e-9, scale));
    records.push_back(make_record("cell mean covariance equals diag(S/N_z) - S/N", ym.covariance, cov_y, 1e-9, var_scale));
    records.push_back(make_record("V_hat bias equals S/N", Eigen::MatrixXd(ym.mean_estimated_covariance - ym.covariance),
                                  Eigen::MatrixXd(table.covariance() / n), 1e-9, var_scale));
    for (const char* name : {"moment_effects", "saturated"}) {
      const auto& e = report.find(name);
      records.push_back(make_record(std::string(name) + " unbiased", e.mean, e.target, 1e-9, scale));
    }
    if (model && !model->is_saturated()) {
      const auto& u = report.find("unsaturated");
      const Eigen::MatrixXd phi = phi_from_proportions(sizes.proportions(), *model);
      const Eigen::MatrixXd l = included_map(*model, phi.bottomRows(phi.rows() - 1));
      const Eigen::MatrixXd g = contrast_matrix(product_scheme(delta)).rows;
      records.push_back(make_record("unsaturated mean equals [I D] tau", u.mean, l * g * table.means(), 1e-9, scale));
      records.push_back(make_record("unsaturated covariance equals [I D] G cov(Y_hat) G' [I D]'", u.covariance,
                                    l * g * cov_y * g.transpose() * l.transpose(), 1e-9, var_scale));
    }
    apply_tolerance(records, c.tol);
  }
  o.body["verification"] = to_json(records);
  o.identities_pass = all_pass(records);
  return o;
}

// ---------------------------------------------------------------------------

AssignmentTable generated_data(int k, const RunConfig& c, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const auto sizes = c.balanced ? DesignSizes::balanced(k, c.per_cell) : random_sizes(k, 2, 2 * c.per_cell, rng);
  return random_dataset(sizes, seed);
}

void drop_skipped(IdentitySuiteResult& r, const std::string& prefix) {
  std::erase_if(r.skipped, [&](const std::string& s) { return s.rfind(prefix, 0) == 0; });
}

Outcome verify(const RunConfig& c) {
  const bool generated = c.input.empty();
  std::optional<AssignmentTable> data;
  if (generated) {
    if (c.k < 1 || c.k > 8) throw Error(ErrorCode::InvalidArgument, "--K must lie in [1, 8] for generated data");
    data.emplace(generated_data(c.k, c, c.seed));
  } else {
    const auto factors = c.factors.empty() ? header_factors(c.input, c.outcome_column) : c.factors;
    data.emplace(ingest_csv(c.input, FactorSpec(factors), c.outcome_column));
  }
  const int k = data->factor_count();
  const ShiftVector delta = c.delta ? ShiftVector(*c.delta) : ShiftVector::constant(k, 0.5);
  if (delta.size() != k) throw Error(ErrorCode::DimensionMismatch, "--delta needs " + std::to_string(k) + " values");
  IdentitySuiteOptions options;
  options.perturbation = c.perturb;
  if (!c.model.empty()) options.terms = parse_terms(c.model, data->spec());

  auto result = run_identity_suite(*data, delta, options);
  Json datasets = Json::array();
  datasets.push_back({{"K", k}, {"N", data->unit_count()}, {"source", generated ? "generated" : c.input}});
  if (generated) {
    // Companion data sets for checks tied to K = 2 and K = 3.
    const auto companion_delta = [&](int kk) { return ShiftVector::constant(kk, 0.5); };
    if (k != 2) {
      const auto d2 = generated_data(2, c, replicate_seed(c.seed, 2));
      auto more = verify_shift_strategies(d2);
      auto w = verify_additive_weights(d2, companion_delta(2));
      more.insert(more.end(), w.begin(), w.end());
      result.records.insert(result.records.end(), more.begin(), more.end());
      drop_skipped(result, "shift strategies");
      drop_skipped(result, "additive-model weights");
      datasets.push_back({{"K", 2}, {"N", d2.unit_count()}, {"source", "generated companion"}});
    }
    if (k != 3) {
      const auto d3 = generated_data(3, c, replicate_seed(c.seed, 3));
      auto more = verify_three_factor_d(d3, companion_delta(3));
      result.records.insert(result.records.end(), more.begin(), more.end());
      drop_skipped(result, "three-factor closed-form D");
      datasets.push_back({{"K", 3}, {"N", d3.unit_count()}, {"source", "generated companion"}});
    }
  }
  apply_tolerance(result.records, c.tol);

  Outcome o;
  o.body["datasets"] = datasets;
  o.body["delta"] = delta.values();
  o.body["identities"] = to_json(result);
  o.identities_pass = result.all_pass();
  return o;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv(kSeedEnv)) {
    std::uint64_t v = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (!s.empty() && ec == std::errc() && ptr == s.data() + s.size()) return v;
    throw Error(ErrorCode::InvalidArgument, std::string(kSeedEnv) + " is not an unsigned integer");
  }
  return 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig c;
  std::string factors_text;
  std::string delta_text;
  std::string sizes_text;
  std::size_t reps = 0;
  std::size_t n = 0;

  CLI::App app{"Factorial experiment analysis: moment and regression estimators, identity checks, "
               "randomization simulations. All output is JSON."};
  app.set_version_flag("--version", FACTORIAL_VERSION);
  app.require_subcommand(1);

  const auto add_common = [&](CLI::App* s) {
    s->add_option("--factors", factors_text, "Comma-separated factor labels (default: CSV header minus outcome)");
    s->add_option("--delta", delta_text, "Comma-separated location shifts in [0,1], one per factor");
    s->add_option("--model", c.model, "Comma-separated included terms, e.g. A,B,A:B");
    s->add_option("--alpha", c.alpha, "Confidence level is 1 - alpha")->capture_default_str();
    s->add_option("--seed", c.seed, std::string("Master seed (default from ") + kSeedEnv + ", else 1)");
    s->add_option("--out", c.out, "Write JSON here instead of stdout");
    s->add_option("--tol", c.tol, "Override the tolerance of every identity record");
  };

  auto* an = app.add_subcommand("analyze", "Moment-based and regression inference on a CSV data set");
  add_common(an);
  an->add_option("--input", c.input, "CSV with 0/1 factor columns and an outcome column")->required();
  an->add_option("--outcome-col", c.outcome_column, "Outcome column")->capture_default_str();
  an->add_option("--scheme", c.scheme, "equal | empirical | product:d1,...,dK | file.json")->capture_default_str();

  auto* sim = app.add_subcommand("simulate", "Design-based expectations by enumeration or Monte Carlo");
  add_common(sim);
  sim->add_option("--population", c.population, "constant | heterogeneous | no-three-way | file.csv")
      ->capture_default_str();
  sim->add_option("--sizes", sizes_text, "Comma-separated N_z in cell order (each >= 2)")->required();
  sim->add_option("--N", n, "Total units (checked against --sizes)");
  sim->add_option("--scheme", c.scheme, "Weighting scheme of the moment estimator")->capture_default_str();
  sim->add_option("--noise", c.noise, "Noise half-width of the heterogeneous population")->capture_default_str();
  sim->add_option("--reps", reps, "Monte Carlo replicates (implies Monte Carlo unless --exact)");
  sim->add_flag("--exact", c.exact, "Require full enumeration");
  sim->add_flag("--allow-mc", c.allow_mc, "Fall back to Monte Carlo when enumeration is infeasible");
  sim->add_option("--threads", c.threads, "Worker threads for Monte Carlo")->capture_default_str();

  auto* ver = app.add_subcommand("verify", "Run the identity suite on given or generated data");
  add_common(ver);
  ver->add_option("--input", c.input, "CSV data (default: generate random data)");
  ver->add_option("--outcome-col", c.outcome_column, "Outcome column")->capture_default_str();
  ver->add_option("--K", c.k, "Factors of generated data")->capture_default_str();
  ver->add_flag("--balanced", c.balanced, "Generate equal cell sizes");
  ver->add_option("--per-cell", c.per_cell, "Units per cell when balanced; twice this caps random sizes")
      ->capture_default_str();
  ver->add_option("--perturb", c.perturb, "Test hook: add this to fitted coefficients before checking");

  try {
    c.seed = default_seed();
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }

  try {
    c.command = an->parsed() ? "analyze" : sim->parsed() ? "simulate" : "verify";
    if (!factors_text.empty()) c.factors = split_csv_record(factors_text);
    if (!delta_text.empty()) c.delta = parse_number_list(delta_text);
    if (!sizes_text.empty()) c.sizes = parse_size_list(sizes_text);
    if (sim->count("--reps") > 0) c.reps = reps;
    if (sim->count("--N") > 0) c.n = n;
    if (c.per_cell < 2) throw Error(ErrorCode::InvalidArgument, "--per-cell must be at least 2");

    Outcome o = c.command == "analyze" ? analyze(c) : c.command == "simulate" ? simulate(c, err) : verify(c);
    Json doc{{"version", FACTORIAL_VERSION}, {"seed", c.seed}, {"config", config_json(c)}};
    for (auto& [key, value] : o.body.items()) doc[key] = value;
    doc["status"] = o.identities_pass ? "ok" : "identity_failure";

    const std::string text = doc.dump(2) + "\n";
    if (c.out.empty()) {
      out << text;
    } else {
      std::ofstream f(c.out);
      if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + c.out);
      f << text;
    }
    if (!o.identities_pass) {
      err << "error: one or more identity checks failed\n";
      return kExitIdentity;
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace factorial
