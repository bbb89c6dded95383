#include "factorial/serialize.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "factorial/error.hpp"

namespace factorial {

namespace {

double parse_double(std::string_view text, const std::string& context) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw Error(ErrorCode::ParseError, context + ": not a finite number '" + std::string(text) + "'");
  }
  return v;
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::vector<std::string> subset_labels(const FactorSpec& spec, const std::vector<SubsetIndex>& subsets) {
  std::vector<std::string> out;
  for (const auto& s : subsets) out.push_back(s.label(spec));
  return out;
}

}  // namespace

Json to_json(const Eigen::VectorXd& v) {
  Json j = Json::array();
  for (double x : v) j.push_back(number(x));
  return j;
}

Json to_json(const Eigen::MatrixXd& m) {
  Json j = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Eigen::VectorXd(m.row(r).transpose())));
  return j;
}

Json to_json(const VerificationRecord& r) {
  Json j{{"identity", r.identity}, {"max_rel_err", number(r.max_rel_err)}, {"tolerance", r.tolerance},
         {"pass", r.pass}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

Json to_json(const std::vector<VerificationRecord>& records) {
  Json j = Json::array();
  for (const auto& r : records) j.push_back(to_json(r));
  return j;
}

Json to_json(const InferenceReport& r) {
  Json effects = Json::array();
  for (std::size_t j = 0; j < r.index.size(); ++j) {
    const auto e = static_cast<Eigen::Index>(j);
    effects.push_back({{"effect", r.index[j].label(r.spec)},
                       {"estimate", number(r.estimate[e])},
                       {"se", number(r.se[e])},
                       {"z", number(r.z[e])},
                       {"ci_low", number(r.ci_low[e])},
                       {"ci_high", number(r.ci_high[e])}});
  }
  Json tests = Json::array();
  for (const auto& t : r.joint_tests) {
    tests.push_back({{"effects", subset_labels(r.spec, t.effects)},
                     {"statistic", number(t.statistic)},
                     {"df", t.df},
                     {"p_value", number(t.p_value)}});
  }
  return {{"alpha", r.alpha},
          {"critical_value", r.critical_value},
          {"effects", effects},
          {"covariance", to_json(r.covariance)},
          {"joint_tests", tests}};
}

Json to_json(const FitResult& f) {
  Json coef = Json::object();
  const Eigen::VectorXd se = f.robust_cov_full.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index j = 0; j < f.coefficients.size(); ++j) {
    const std::string label =
        static_cast<std::size_t>(j) < f.labels.size() ? f.labels[static_cast<std::size_t>(j)] : "x" + std::to_string(j);
    coef[label] = {{"coefficient", number(f.coefficients[j])}, {"robust_se", number(se[j])}};
  }
  return {{"coefficients", coef}, {"robust_covariance", to_json(f.robust_cov_full)}};
}

Json to_json(const OmittedRelationReport& r, const std::vector<std::string>& included,
             const std::vector<std::string>& omitted) {
  return {{"included", included},
          {"omitted", omitted},
          {"unsaturated", to_json(r.unsaturated)},
          {"saturated_included", to_json(r.saturated_included)},
          {"saturated_omitted", to_json(r.saturated_omitted)},
          {"D", to_json(r.d)},
          {"D_gamma_minus_max_abs", number(r.d_gamma_minus_norm)},
          {"criterion_max_abs_over_N", number(r.criterion_norm)},
          {"orthogonal_raw", r.orthogonal_raw},
          {"orthogonal_centered", r.orthogonal_centered},
          {"checks", to_json(std::vector<VerificationRecord>{r.relation, r.criterion})}};
}

Json to_json(const SimReport& r) {
  Json est = Json::array();
  for (const auto& e : r.estimators) {
    Json j{{"name", e.name},
           {"labels", e.labels},
           {"target", to_json(e.target)},
           {"mean", to_json(e.mean)},
           {"covariance", to_json(e.covariance)}};
    if (e.mean_estimated_covariance.size() > 0) j["mean_estimated_covariance"] = to_json(e.mean_estimated_covariance);
    if (e.coverage.size() > 0) {
      j["coverage"] = to_json(e.coverage);
      j["coverage_mc_se"] = to_json(e.coverage_mc_se);
    }
    est.push_back(std::move(j));
  }
  Json meta{{"mode", r.exact ? "exact" : "mc"}, {"reps", r.replicates}, {"alpha", r.alpha}, {"sizes", r.sizes}};
  if (!r.exact) meta["seed"] = r.seed;
  return {{"metadata", meta}, {"estimators", est}};
}

Json to_json(const IdentitySuiteResult& r) {
  return {{"all_pass", r.all_pass()}, {"records", to_json(r.records)}, {"skipped", r.skipped}};
}

Json to_json(const OrderingReport& r) {
  return {{"cov_saturated", to_json(r.cov_saturated)},
          {"cov_unsaturated", to_json(r.cov_unsaturated)},
          {"min_eigenvalue", number(r.min_eigenvalue)},
          {"ordered", r.ordered},
          {"D", to_json(r.d)},
          {"checks", to_json(std::vector<VerificationRecord>{r.mean_formula, r.cov_formula})}};
}

// ---------------------------------------------------------------------------
// Schemes

Json scheme_to_json(const WeightingScheme& scheme, const FactorSpec& spec) {
  Json joint = Json::object();
  for (std::size_t z = 0; z < scheme.cell_count(); ++z) joint[cell_label(z, scheme.factor_count())] = scheme.mass(z);
  return {{"factors", spec.labels()}, {"joint", joint}};
}

WeightingScheme scheme_from_json(const Json& j, const FactorSpec& spec) {
  if (!j.is_object() || !j.contains("joint") || !j["joint"].is_object()) {
    throw Error(ErrorCode::ParseError, "scheme JSON needs an object member 'joint'");
  }
  if (j.contains("factors") && j["factors"].get<std::vector<std::string>>() != spec.labels()) {
    throw Error(ErrorCode::DimensionMismatch, "scheme factors differ from the data factors");
  }
  const int k = spec.size();
  std::vector<double> mass(spec.cell_count(), 0.0);
  std::vector<bool> seen(spec.cell_count(), false);
  for (const auto& [key, value] : j["joint"].items()) {
    if (key.size() != static_cast<std::size_t>(k) || key.find_first_not_of("01") != std::string::npos) {
      throw Error(ErrorCode::ParseError, "scheme cell key '" + key + "' is not a " + std::to_string(k) + "-digit 0/1 label");
    }
    if (!value.is_number()) throw Error(ErrorCode::ParseError, "scheme mass for '" + key + "' is not a number");
    const std::size_t z = std::stoul(key, nullptr, 2);
    if (seen[z]) throw Error(ErrorCode::ParseError, "duplicate scheme cell '" + key + "'");
    seen[z] = true;
    mass[z] = value.get<double>();
  }
  return from_joint(k, std::move(mass));
}

WeightingScheme resolve_scheme(const std::string& descriptor, const FactorSpec& spec, const CellSummary* summary) {
  if (descriptor == "equal") return equal_scheme(spec.size());
  if (descriptor == "empirical") {
    if (summary == nullptr) throw Error(ErrorCode::InvalidArgument, "empirical scheme needs observed data");
    return empirical_scheme(*summary);
  }
  constexpr std::string_view product_prefix = "product:";
  if (descriptor.rfind(product_prefix, 0) == 0) {
    const auto values = parse_number_list(descriptor.substr(product_prefix.size()));
    if (static_cast<int>(values.size()) != spec.size()) {
      throw Error(ErrorCode::DimensionMismatch, "product scheme needs " + std::to_string(spec.size()) + " values");
    }
    return product_scheme(ShiftVector(values));
  }
  if (descriptor.size() > 5 && descriptor.substr(descriptor.size() - 5) == ".json") {
    std::ifstream in(descriptor);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open scheme file " + descriptor);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, "scheme file " + descriptor + ": " + e.what());
    }
    return scheme_from_json(j, spec);
  }
  throw Error(ErrorCode::InvalidArgument,
              "unknown scheme '" + descriptor + "' (expected equal, empirical, product:d1,... or a .json file)");
}

// ---------------------------------------------------------------------------
// Lists

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& f : split_csv_record(text)) out.push_back(parse_double(f, "number list"));
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& f : split_csv_record(text)) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
      throw Error(ErrorCode::ParseError, "size list: not a non-negative integer '" + f + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<SubsetIndex> parse_terms(const std::string& text, const FactorSpec& spec) {
  std::vector<SubsetIndex> out;
  for (const auto& f : split_csv_record(text)) out.push_back(SubsetIndex::parse(f, spec));
  return out;
}

// ---------------------------------------------------------------------------
// CSV

void write_population_csv(std::ostream& out, const PotentialOutcomeTable& table) {
  const int k = table.factor_count();
  for (std::size_t z = 0; z < table.cell_count(); ++z) out << (z ? "," : "") << cell_label(z, k);
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < table.unit_count(); ++i) {
    for (std::size_t z = 0; z < table.cell_count(); ++z) {
      const auto res = std::to_chars(buf, buf + sizeof buf, table(i, z));
      out << (z ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

PotentialOutcomeTable read_population_csv(std::istream& in, const FactorSpec& spec) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty population file");
  const auto header = split_csv_record(line);
  const std::size_t q = spec.cell_count();
  if (header.size() != q) {
    throw Error(ErrorCode::ParseError, "population header needs " + std::to_string(q) + " cell columns");
  }
  std::vector<std::size_t> column_cell(q);
  std::vector<bool> seen(q, false);
  for (std::size_t c = 0; c < q; ++c) {
    const auto& h = header[c];
    if (h.size() != static_cast<std::size_t>(spec.size()) || h.find_first_not_of("01") != std::string::npos) {
      throw Error(ErrorCode::ParseError, "population header '" + h + "' is not a cell label");
    }
    column_cell[c] = std::stoul(h, nullptr, 2);
    if (seen[column_cell[c]]) throw Error(ErrorCode::ParseError, "duplicate population column '" + h + "'");
    seen[column_cell[c]] = true;
  }
  std::vector<double> flat;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_record(line);
    if (fields.size() != q) {
      throw Error(ErrorCode::ParseError, "population line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(q) + " fields");
    }
    std::vector<double> row(q);
    for (std::size_t c = 0; c < q; ++c) {
      row[column_cell[c]] = parse_double(fields[c], "population line " + std::to_string(line_no));
    }
    flat.insert(flat.end(), row.begin(), row.end());
    ++rows;
  }
  Eigen::MatrixXd v(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(q));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t z = 0; z < q; ++z) v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(z)) = flat[i * q + z];
  }
  return PotentialOutcomeTable(spec, std::move(v));
}

void write_contrast_csv(std::ostream& out, const ContrastMatrix& g, const FactorSpec& spec) {
  out << "effect";
  for (std::size_t z = 0; z < spec.cell_count(); ++z) out << ',' << cell_label(z, spec.size());
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < g.row_index.size(); ++r) {
    out << g.row_index[r].label(spec);
    for (Eigen::Index z = 0; z < g.rows.cols(); ++z) {
      const auto res = std::to_chars(buf, buf + sizeof buf, g.rows(static_cast<Eigen::Index>(r), z));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace factorial
