#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "factorial/contrasts.hpp"
#include "factorial/design.hpp"
#include "factorial/estimation.hpp"
#include "factorial/identities.hpp"
#include "factorial/potential_outcomes.hpp"
#include "factorial/randomization.hpp"
#include "factorial/regression.hpp"
#include "factorial/verification.hpp"
#include "factorial/weighting.hpp"

namespace factorial {

using Json = nlohmann::ordered_json;

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Eigen::MatrixXd& m);
Json to_json(const VerificationRecord& r);
Json to_json(const std::vector<VerificationRecord>& records);
Json to_json(const InferenceReport& r);
/// Term label -> {coefficient, robust_se}, plus the full robust covariance.
Json to_json(const FitResult& f);
Json to_json(const OmittedRelationReport& r, const std::vector<std::string>& included,
             const std::vector<std::string>& omitted);
Json to_json(const SimReport& r);
Json to_json(const IdentitySuiteResult& r);
Json to_json(const OrderingReport& r);

/// {"factors": [...], "joint": {"00": w, ...}}
Json scheme_to_json(const WeightingScheme& scheme, const FactorSpec& spec);
WeightingScheme scheme_from_json(const Json& j, const FactorSpec& spec);

/// "equal", "empirical", "product:d1,...,dK" or a path ending in ".json".
/// `summary` is required for "empirical".
WeightingScheme resolve_scheme(const std::string& descriptor, const FactorSpec& spec,
                               const CellSummary* summary = nullptr);

/// Comma-separated numbers; throws ParseError on anything else.
std::vector<double> parse_number_list(const std::string& text);
/// Comma-separated non-negative integers.
std::vector<std::size_t> parse_size_list(const std::string& text);
/// Comma-separated subset labels such as "A,B,A:B".
std::vector<SubsetIndex> parse_terms(const std::string& text, const FactorSpec& spec);

/// Population CSV: header of cell labels ("00", "01", ...), one row per unit.
void write_population_csv(std::ostream& out, const PotentialOutcomeTable& table);
PotentialOutcomeTable read_population_csv(std::istream& in, const FactorSpec& spec);

/// Contrast matrix CSV: first column the effect label, then one column per cell.
void write_contrast_csv(std::ostream& out, const ContrastMatrix& g, const FactorSpec& spec);

}  // namespace factorial
