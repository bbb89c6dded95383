#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "factorial/design.hpp"
#include "support.hpp"

using namespace factorial;
using factorial::testing::n8_example;

TEST(FactorSpec, RejectsBadLabels) {
  EXPECT_FACTORIAL_ERROR(FactorSpec({}), ErrorCode::InvalidArgument);
  EXPECT_FACTORIAL_ERROR(FactorSpec({"A", "A"}), ErrorCode::InvalidArgument);
  EXPECT_FACTORIAL_ERROR(FactorSpec({"A", ""}), ErrorCode::InvalidArgument);
  EXPECT_FACTORIAL_ERROR(FactorSpec({"A:B"}), ErrorCode::InvalidArgument);
  EXPECT_FACTORIAL_ERROR(FactorSpec::with_default_labels(17), ErrorCode::InvalidArgument);
}

TEST(FactorSpec, DefaultLabels) {
  const auto s = FactorSpec::with_default_labels(3);
  EXPECT_EQ(s.labels(), (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_EQ(s.cell_count(), 8U);
  EXPECT_EQ(s.index_of("C"), 2);
}

TEST(Treatments, BinaryCountingOrder) {
  const auto one = enumerate_treatments(FactorSpec::with_default_labels(1));
  ASSERT_EQ(one.size(), 2U);
  EXPECT_EQ(one[0].label(), "0");
  EXPECT_EQ(one[1].label(), "1");

  const auto two = enumerate_treatments(FactorSpec::with_default_labels(2));
  std::vector<std::string> labels;
  for (const auto& t : two) labels.push_back(t.label());
  EXPECT_EQ(labels, (std::vector<std::string>{"00", "01", "10", "11"}));

  const auto three = enumerate_treatments(FactorSpec::with_default_labels(3));
  ASSERT_EQ(three.size(), 8U);
  EXPECT_EQ(three.front().label(), "000");
  EXPECT_EQ(three.back().label(), "111");
  for (std::size_t z = 0; z < three.size(); ++z) {
    EXPECT_EQ(three[z].cell(), z);
    EXPECT_EQ(TreatmentIndex::from_cell(z, 3), three[z]);
  }
}

TEST(Subsets, CanonicalOrderAndLabels) {
  const FactorSpec spec({"A", "B", "C"});
  std::vector<std::string> labels;
  for (const auto& s : canonical_subsets(3)) labels.push_back(s.label(spec));
  EXPECT_EQ(labels, (std::vector<std::string>{"A", "B", "C", "A:B", "A:C", "B:C", "A:B:C"}));
  EXPECT_EQ(SubsetIndex::parse("A:C", spec).mask(), 0b101U);
  EXPECT_EQ(SubsetIndex::parse("C:A", spec).mask(), 0b101U);
  EXPECT_FACTORIAL_ERROR(SubsetIndex::parse("A:D", spec), ErrorCode::InvalidArgument);
  EXPECT_FACTORIAL_ERROR(SubsetIndex(0), ErrorCode::InvalidArgument);

  const auto pos = canonical_positions(3);
  const auto subsets = canonical_subsets(3);
  for (std::size_t j = 0; j < subsets.size(); ++j) EXPECT_EQ(pos[subsets[j].mask()], j);
}

TEST(CellSummary, N8Example) {
  const auto s = cell_summary(n8_example());
  EXPECT_EQ(s.counts, (std::vector<std::size_t>{2, 2, 2, 2}));
  EXPECT_EQ(s.means, (std::vector<double>{2, 3, 6, 8}));
  EXPECT_EQ(s.variances, (std::vector<double>{2, 2, 2, 8}));
  EXPECT_EQ(s.unit_count(), 8U);
}

TEST(CellSummary, ConstantData) {
  const AssignmentTable d(FactorSpec({"A"}), {0, 0, 1, 1, 1}, {4, 4, 4, 4, 4});
  const auto s = cell_summary(d);
  EXPECT_EQ(s.means, (std::vector<double>{4, 4}));
  EXPECT_EQ(s.variances, (std::vector<double>{0, 0}));
}

TEST(CellSummary, Preconditions) {
  const AssignmentTable empty_cell(FactorSpec({"A"}), {0, 0}, {1, 2});
  EXPECT_FACTORIAL_ERROR(cell_summary(empty_cell, SummaryNeeds::Means), ErrorCode::EmptyCell);
  const auto counts = cell_summary(empty_cell, SummaryNeeds::Counts);
  EXPECT_TRUE(std::isnan(counts.means[1]));

  const AssignmentTable singleton(FactorSpec({"A"}), {0, 0, 1}, {1, 2, 3});
  EXPECT_FACTORIAL_ERROR(cell_summary(singleton), ErrorCode::SingletonCell);
  EXPECT_NO_THROW(cell_summary(singleton, SummaryNeeds::Means));
}

TEST(Csv, ParsesFactorsAndOutcome) {
  std::istringstream in("A,B,Y,extra\n0,0,1.5,x\n0,1,2,y\n1,0,-3e-1,z\n1,1,4,\"q,r\"\n");
  const auto d = parse_csv(in, FactorSpec({"A", "B"}));
  EXPECT_EQ(d.unit_count(), 4U);
  EXPECT_EQ(d.cells(), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(d.outcome(2), -0.3);
}

TEST(Csv, ColumnOrderFollowsLabels) {
  std::istringstream in("Y,B,A\n7,1,0\n");
  const auto d = parse_csv(in, FactorSpec({"A", "B"}));
  EXPECT_EQ(d.cell(0), 1U);
}

TEST(Csv, Errors) {
  const FactorSpec spec({"A", "B"});
  std::istringstream missing("A,B\n0,0\n");
  EXPECT_FACTORIAL_ERROR(parse_csv(missing, spec), ErrorCode::ParseError);
  std::istringstream bad_level("A,B,Y\n2,0,1\n");
  EXPECT_FACTORIAL_ERROR(parse_csv(bad_level, spec), ErrorCode::ParseError);
  std::istringstream bad_y("A,B,Y\n0,0,abc\n");
  EXPECT_FACTORIAL_ERROR(parse_csv(bad_y, spec), ErrorCode::ParseError);
  std::istringstream short_row("A,B,Y\n0,0\n");
  EXPECT_FACTORIAL_ERROR(parse_csv(short_row, spec), ErrorCode::ParseError);
  std::istringstream empty("");
  EXPECT_FACTORIAL_ERROR(parse_csv(empty, spec), ErrorCode::ParseError);
}

TEST(AssignmentTable, RejectsMismatch) {
  EXPECT_FACTORIAL_ERROR(AssignmentTable(FactorSpec({"A"}), {0, 1}, {1.0}), ErrorCode::DimensionMismatch);
  EXPECT_FACTORIAL_ERROR(AssignmentTable(FactorSpec({"A"}), {0, 2}, {1.0, 2.0}), ErrorCode::DimensionMismatch);
}
