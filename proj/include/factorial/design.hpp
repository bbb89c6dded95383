#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace factorial {

/// Largest supported number of binary factors (2^16 treatment cells).
inline constexpr int kMaxFactors = 16;

/// K binary factors with distinct, non-empty labels.
class FactorSpec {
 public:
  explicit FactorSpec(std::vector<std::string> labels);

  /// Labels "A", "B", ... for K <= 26, "F1", "F2", ... beyond.
  static FactorSpec with_default_labels(int factor_count);

  int size() const noexcept { return static_cast<int>(labels_.size()); }
  std::size_t cell_count() const noexcept { return std::size_t{1} << labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::string& label(int k) const { return labels_.at(static_cast<std::size_t>(k)); }
  int index_of(std::string_view label) const;

  bool operator==(const FactorSpec&) const = default;

 private:
  std::vector<std::string> labels_;
};

/// One treatment combination z = (z_1, ..., z_K).
///
/// Cells are numbered in binary-counting order with the last factor varying
/// fastest, so for K = 2 the order is (00), (01), (10), (11).
class TreatmentIndex {
 public:
  explicit TreatmentIndex(std::vector<std::uint8_t> levels);
  static TreatmentIndex from_cell(std::size_t cell, int factor_count);

  int size() const noexcept { return static_cast<int>(levels_.size()); }
  int level(int k) const { return levels_.at(static_cast<std::size_t>(k)); }
  const std::vector<std::uint8_t>& levels() const noexcept { return levels_; }
  std::size_t cell() const noexcept;
  std::string label() const;

  bool operator==(const TreatmentIndex&) const = default;

 private:
  std::vector<std::uint8_t> levels_;
};

/// Level of factor k (0-based) in cell `cell` of a design with K factors.
constexpr int cell_level(std::size_t cell, int factor, int factor_count) noexcept {
  return static_cast<int>((cell >> (factor_count - 1 - factor)) & 1U);
}

std::string cell_label(std::size_t cell, int factor_count);

std::vector<TreatmentIndex> enumerate_treatments(const FactorSpec& spec);

/// A non-empty subset of factors, stored as a bit mask (bit k = factor k).
class SubsetIndex {
 public:
  explicit SubsetIndex(std::uint32_t mask);
  static SubsetIndex from_members(std::span<const int> members);
  /// Parses "A", "A:B", ... against the factor labels.
  static SubsetIndex parse(std::string_view label, const FactorSpec& spec);

  std::uint32_t mask() const noexcept { return mask_; }
  int size() const noexcept;
  bool contains(int k) const noexcept { return (mask_ >> k) & 1U; }
  std::vector<int> members() const;
  std::string label(const FactorSpec& spec) const;

  bool operator==(const SubsetIndex&) const = default;
  /// Canonical order: cardinality first, then lexicographic on members.
  bool operator<(const SubsetIndex& other) const;

 private:
  std::uint32_t mask_;
};

/// All 2^K - 1 non-empty subsets in canonical order.
std::vector<SubsetIndex> canonical_subsets(int factor_count);

/// Position of each subset mask in canonical order; entry 0 (empty set) is unused.
std::vector<std::size_t> canonical_positions(int factor_count);

/// Observed data: per-unit treatment cell and outcome.
class AssignmentTable {
 public:
  AssignmentTable(FactorSpec spec, std::vector<std::size_t> cells, std::vector<double> outcomes);

  const FactorSpec& spec() const noexcept { return spec_; }
  int factor_count() const noexcept { return spec_.size(); }
  std::size_t cell_count() const noexcept { return spec_.cell_count(); }
  std::size_t unit_count() const noexcept { return cells_.size(); }

  std::size_t cell(std::size_t unit) const { return cells_.at(unit); }
  TreatmentIndex treatment(std::size_t unit) const;
  int level(std::size_t unit, int factor) const {
    return cell_level(cells_.at(unit), factor, spec_.size());
  }
  double outcome(std::size_t unit) const { return outcomes_.at(unit); }

  const std::vector<std::size_t>& cells() const noexcept { return cells_; }
  const std::vector<double>& outcomes() const noexcept { return outcomes_; }

 private:
  FactorSpec spec_;
  std::vector<std::size_t> cells_;
  std::vector<double> outcomes_;
};

/// What a caller needs from `cell_summary`; each level adds a precondition.
enum class SummaryNeeds {
  Counts,     // no precondition; means of empty cells are NaN
  Means,      // every cell non-empty
  Variances,  // every cell has at least two units
};

struct CellSummary {
  std::vector<std::size_t> counts;
  std::vector<double> proportions;
  std::vector<double> means;
  /// Unbiased within-cell variances; NaN where the cell has fewer than two units.
  std::vector<double> variances;

  std::size_t unit_count() const;
};

CellSummary cell_summary(const AssignmentTable& data, SummaryNeeds needs = SummaryNeeds::Variances);

/// Reads a CSV with a header row, one 0/1 column per factor label and one
/// numeric outcome column. Extra columns are ignored.
AssignmentTable ingest_csv(const std::filesystem::path& path, const FactorSpec& spec,
                           std::string_view outcome_column = "Y");
/// One CSV record split on commas; double quotes group a field.
std::vector<std::string> split_csv_record(std::string_view line);

AssignmentTable parse_csv(std::istream& in, const FactorSpec& spec,
                          std::string_view outcome_column = "Y");

}  // namespace factorial
