#include "factorial/design.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <set>

#include "factorial/error.hpp"

namespace factorial {

namespace {

void check_factor_count(int k) {
  if (k < 1 || k > kMaxFactors) {
    throw Error(ErrorCode::InvalidArgument,
                "factor count must be in [1, " + std::to_string(kMaxFactors) + "], got " +
                    std::to_string(k));
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Splits one CSV record. Double quotes group a field; "" inside quotes is a literal quote.
std::vector<std::string> split_record(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.emplace_back(trim(field));
  return fields;
}

}  // namespace

std::vector<std::string> split_csv_record(std::string_view line) { return split_record(line); }

// ---------------------------------------------------------------------------
// FactorSpec

FactorSpec::FactorSpec(std::vector<std::string> labels) : labels_(std::move(labels)) {
  check_factor_count(static_cast<int>(labels_.size()));
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw Error(ErrorCode::InvalidArgument, "factor labels must be non-empty");
    if (l.find(':') != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "factor label '" + l + "' must not contain ':'");
    }
    if (!seen.insert(l).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate factor label '" + l + "'");
    }
  }
}

FactorSpec FactorSpec::with_default_labels(int factor_count) {
  check_factor_count(factor_count);
  std::vector<std::string> labels;
  for (int k = 0; k < factor_count; ++k) {
    if (factor_count <= 26) {
      labels.emplace_back(1, static_cast<char>('A' + k));
    } else {
      labels.push_back("F" + std::to_string(k + 1));
    }
  }
  return FactorSpec(std::move(labels));
}

int FactorSpec::index_of(std::string_view label) const {
  for (std::size_t k = 0; k < labels_.size(); ++k) {
    if (labels_[k] == label) return static_cast<int>(k);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown factor label '" + std::string(label) + "'");
}

// ---------------------------------------------------------------------------
// TreatmentIndex

TreatmentIndex::TreatmentIndex(std::vector<std::uint8_t> levels) : levels_(std::move(levels)) {
  check_factor_count(static_cast<int>(levels_.size()));
  for (auto v : levels_) {
    if (v > 1) throw Error(ErrorCode::InvalidArgument, "treatment levels must be 0 or 1");
  }
}

TreatmentIndex TreatmentIndex::from_cell(std::size_t cell, int factor_count) {
  check_factor_count(factor_count);
  if (cell >= (std::size_t{1} << factor_count)) {
    throw Error(ErrorCode::DimensionMismatch, "cell index out of range");
  }
  std::vector<std::uint8_t> levels(static_cast<std::size_t>(factor_count));
  for (int k = 0; k < factor_count; ++k) {
    levels[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(cell_level(cell, k, factor_count));
  }
  return TreatmentIndex(std::move(levels));
}

std::size_t TreatmentIndex::cell() const noexcept {
  std::size_t c = 0;
  for (auto v : levels_) c = (c << 1) | v;
  return c;
}

std::string TreatmentIndex::label() const { return cell_label(cell(), size()); }

std::string cell_label(std::size_t cell, int factor_count) {
  std::string s(static_cast<std::size_t>(factor_count), '0');
  for (int k = 0; k < factor_count; ++k) {
    if (cell_level(cell, k, factor_count)) s[static_cast<std::size_t>(k)] = '1';
  }
  return s;
}

std::vector<TreatmentIndex> enumerate_treatments(const FactorSpec& spec) {
  std::vector<TreatmentIndex> out;
  out.reserve(spec.cell_count());
  for (std::size_t c = 0; c < spec.cell_count(); ++c) {
    out.push_back(TreatmentIndex::from_cell(c, spec.size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// SubsetIndex

SubsetIndex::SubsetIndex(std::uint32_t mask) : mask_(mask) {
  if (mask == 0) throw Error(ErrorCode::InvalidArgument, "factor subset must be non-empty");
}

SubsetIndex SubsetIndex::from_members(std::span<const int> members) {
  std::uint32_t mask = 0;
  for (int k : members) {
    if (k < 0 || k >= kMaxFactors) throw Error(ErrorCode::InvalidArgument, "factor index out of range");
    mask |= (1U << k);
  }
  return SubsetIndex(mask);
}

SubsetIndex SubsetIndex::parse(std::string_view label, const FactorSpec& spec) {
  std::uint32_t mask = 0;
  std::size_t start = 0;
  while (true) {
    const auto colon = label.find(':', start);
    const auto part = trim(label.substr(start, colon == std::string_view::npos ? label.npos : colon - start));
    const int k = spec.index_of(part);
    if (mask & (1U << k)) {
      throw Error(ErrorCode::InvalidArgument, "repeated factor in term '" + std::string(label) + "'");
    }
    mask |= (1U << k);
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  return SubsetIndex(mask);
}

int SubsetIndex::size() const noexcept { return std::popcount(mask_); }

std::vector<int> SubsetIndex::members() const {
  std::vector<int> out;
  for (int k = 0; k < 32; ++k) {
    if (contains(k)) out.push_back(k);
  }
  return out;
}

std::string SubsetIndex::label(const FactorSpec& spec) const {
  std::string s;
  for (int k : members()) {
    if (!s.empty()) s += ':';
    s += spec.label(k);
  }
  return s;
}

bool SubsetIndex::operator<(const SubsetIndex& other) const {
  if (size() != other.size()) return size() < other.size();
  return members() < other.members();
}

std::vector<SubsetIndex> canonical_subsets(int factor_count) {
  check_factor_count(factor_count);
  std::vector<SubsetIndex> out;
  const std::uint32_t full = (1U << factor_count);
  out.reserve(full - 1);
  for (std::uint32_t m = 1; m < full; ++m) out.emplace_back(m);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> canonical_positions(int factor_count) {
  const auto subsets = canonical_subsets(factor_count);
  std::vector<std::size_t> pos(std::size_t{1} << factor_count, std::numeric_limits<std::size_t>::max());
  for (std::size_t j = 0; j < subsets.size(); ++j) pos[subsets[j].mask()] = j;
  return pos;
}

// ---------------------------------------------------------------------------
// AssignmentTable

AssignmentTable::AssignmentTable(FactorSpec spec, std::vector<std::size_t> cells,
                                 std::vector<double> outcomes)
    : spec_(std::move(spec)), cells_(std::move(cells)), outcomes_(std::move(outcomes)) {
  if (cells_.size() != outcomes_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "assignment and outcome lengths differ");
  }
  for (auto c : cells_) {
    if (c >= spec_.cell_count()) throw Error(ErrorCode::DimensionMismatch, "cell index out of range");
  }
}

TreatmentIndex AssignmentTable::treatment(std::size_t unit) const {
  return TreatmentIndex::from_cell(cells_.at(unit), spec_.size());
}

// ---------------------------------------------------------------------------
// CellSummary

std::size_t CellSummary::unit_count() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

CellSummary cell_summary(const AssignmentTable& data, SummaryNeeds needs) {
  const std::size_t q = data.cell_count();
  const std::size_t n = data.unit_count();
  CellSummary s;
  s.counts.assign(q, 0);
  s.means.assign(q, 0.0);
  s.variances.assign(q, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    ++s.counts[data.cell(i)];
    s.means[data.cell(i)] += data.outcome(i);
  }
  for (std::size_t z = 0; z < q; ++z) {
    if (s.counts[z] == 0) {
      if (needs != SummaryNeeds::Counts) {
        throw Error(ErrorCode::EmptyCell, "cell " + cell_label(z, data.factor_count()) + " has no units");
      }
      s.means[z] = std::numeric_limits<double>::quiet_NaN();
    } else {
      s.means[z] /= static_cast<double>(s.counts[z]);
    }
    if (needs == SummaryNeeds::Variances && s.counts[z] < 2) {
      throw Error(ErrorCode::SingletonCell,
                  "cell " + cell_label(z, data.factor_count()) + " has a single unit");
    }
  }
  std::vector<double> ss(q, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = data.outcome(i) - s.means[data.cell(i)];
    ss[data.cell(i)] += d * d;
  }
  for (std::size_t z = 0; z < q; ++z) {
    if (s.counts[z] >= 2) s.variances[z] = ss[z] / static_cast<double>(s.counts[z] - 1);
  }
  s.proportions.resize(q);
  for (std::size_t z = 0; z < q; ++z) {
    s.proportions[z] = n == 0 ? 0.0 : static_cast<double>(s.counts[z]) / static_cast<double>(n);
  }
  return s;
}

// ---------------------------------------------------------------------------
// CSV ingestion

AssignmentTable parse_csv(std::istream& in, const FactorSpec& spec, std::string_view outcome_column) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty input, expected a header row");
  const auto header = split_record(line);

  auto find_column = [&](std::string_view name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorCode::ParseError, "missing column '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  std::vector<std::size_t> factor_cols;
  for (const auto& label : spec.labels()) factor_cols.push_back(find_column(label));
  const std::size_t y_col = find_column(outcome_column);

  std::vector<std::size_t> cells;
  std::vector<double> outcomes;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_record(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected " +
                                             std::to_string(header.size()) + " fields, got " +
                                             std::to_string(fields.size()));
    }
    std::size_t cell = 0;
    for (std::size_t k = 0; k < factor_cols.size(); ++k) {
      const auto& v = fields[factor_cols[k]];
      if (v != "0" && v != "1") {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": factor '" +
                                               spec.label(static_cast<int>(k)) +
                                               "' must be 0 or 1, got '" + v + "'");
      }
      cell = (cell << 1) | static_cast<std::size_t>(v[0] - '0');
    }
    const auto& yv = fields[y_col];
    double y = 0.0;
    const auto* first = yv.data();
    const auto* last = yv.data() + yv.size();
    const auto [ptr, ec] = std::from_chars(first, last, y);
    if (yv.empty() || ec != std::errc() || ptr != last || !std::isfinite(y)) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) +
                                             ": non-numeric outcome '" + yv + "'");
    }
    cells.push_back(cell);
    outcomes.push_back(y);
  }
  return AssignmentTable(spec, std::move(cells), std::move(outcomes));
}

AssignmentTable ingest_csv(const std::filesystem::path& path, const FactorSpec& spec,
                           std::string_view outcome_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path.string() + "'");
  return parse_csv(in, spec, outcome_column);
}

}  // namespace factorial
