#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cfair/csv.hpp"
#include "cfair/error.hpp"
#include "cfair/stats.hpp"
#include "cfair/tabular.hpp"

using namespace cfair;

namespace {

Schema basic_schema() {
  return Schema::from_json(R"({"columns": {"age": "numeric", "sex": "binary", "y": "binary"}, "target": "y"})");
}

Table one_column(const std::vector<double>& v, const std::string& name = "v") {
  return Table({Column{name, ColumnKind::numeric, {}}}, v, v.size());
}

GroupSplit split_of(std::size_t n0, std::size_t n1) {
  GroupSplit s;
  for (std::size_t i = 0; i < n0; ++i) s.g0.push_back(i);
  for (std::size_t i = 0; i < n1; ++i) s.g1.push_back(n0 + i);
  return s;
}

}  // namespace

TEST(Csv, QuotedFieldsAndComments) {
  const auto doc = csv::parse("# format=x/1\na,b\n\"x, y\",\"he said \"\"hi\"\"\"\r\n1,\"multi\nline\"\n");
  ASSERT_EQ(doc.header, (csv::Row{"a", "b"}));
  ASSERT_EQ(doc.rows.size(), 2u);
  EXPECT_EQ(doc.rows[0][0], "x, y");
  EXPECT_EQ(doc.rows[0][1], "he said \"hi\"");
  EXPECT_EQ(doc.rows[1][1], "multi\nline");
}

TEST(Csv, RaggedRowRejected) { EXPECT_THROW(csv::parse("a,b\n1,2,3\n"), DataError); }

TEST(Csv, WriterRoundTrip) {
  std::ostringstream out;
  {
    csv::Writer w(out, "test/1", {"name", "value"});
    w.row({"comma, inside", csv::format_number(0.1)});
  }
  EXPECT_EQ(out.str().rfind("# format=test/1\n", 0), 0u);
  const auto doc = csv::parse(out.str());
  EXPECT_EQ(doc.rows[0][0], "comma, inside");
  EXPECT_EQ(std::stod(doc.rows[0][1]), 0.1);
}

TEST(LoadTable, ThreeRows) {
  const auto t = parse_table("age,sex,y\n30,1,0\n40,0,1\n50,1,1\n", basic_schema());
  EXPECT_EQ(t.n_rows(), 3u);
  EXPECT_EQ(t.n_cols(), 3u);
  EXPECT_DOUBLE_EQ(t.at(1, 0), 40.0);
}

TEST(LoadTable, MissingTargetDropsRow) {
  const auto t = parse_table("age,sex,y\n30,1,0\n40,0,\n50,1,1\n", basic_schema());
  ASSERT_EQ(t.n_rows(), 2u);
  EXPECT_EQ(t.column("age"), (std::vector<double>{30, 50}));
}

TEST(LoadTable, Errors) {
  EXPECT_THROW(parse_table("age,sex\n30,1\n", basic_schema()), DataError);          // unknown column
  EXPECT_THROW(parse_table("age,sex,y\nabc,1,0\n", basic_schema()), DataError);     // non-numeric
  EXPECT_THROW(parse_table("age,sex,y\n30,2,0\n", basic_schema()), DataError);      // bad binary
  EXPECT_THROW(parse_table("age,sex,y\n,1,0\n", basic_schema()), DataError);        // missing feature
  EXPECT_THROW(parse_table("age,sex,y\n30,1,\n", basic_schema()), DataError);       // empty after drop
  EXPECT_THROW(load_table("/nonexistent/file.csv", basic_schema()), Error);
}

TEST(LoadTable, CategoricalFirstAppearanceCodes) {
  const auto schema = Schema::from_json(R"({"columns": [{"name": "c", "kind": "categorical"}]})");
  const auto t = parse_table("c\nzeta\nalpha\nzeta\nbeta\n", schema);
  EXPECT_EQ(t.column_info("c").levels, (std::vector<std::string>{"zeta", "alpha", "beta"}));
  EXPECT_EQ(t.labels("c"), (std::vector<int>{0, 1, 0, 2}));
}

TEST(Schema, JsonRoundTripKeepsOrder) {
  const auto s = basic_schema();
  const auto again = Schema::from_json(s.to_json());
  ASSERT_EQ(again.columns.size(), 3u);
  EXPECT_EQ(again.columns[0].first, "age");
  EXPECT_EQ(again.columns[2].first, "y");
  EXPECT_EQ(again.target, "y");
}

TEST(Preprocess, OneToHundredOutliers) {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  const std::vector<std::string> cols{"v"};
  const auto r = preprocess(one_column(v), cols, 2.5, 97.5);
  // Linear-rule bounds are 3.475 and 97.525.
  EXPECT_EQ(r.table.n_rows(), 94u);
  EXPECT_EQ(r.kept_rows.front(), 3u);  // value 4
  EXPECT_EQ(r.kept_rows.back(), 96u);  // value 97
}

TEST(Preprocess, FullRangeKeepsAllAndStandardizes) {
  const std::vector<double> v{3, 9, 1, 4, 7, 2};
  const std::vector<std::string> cols{"v"};
  const auto r = preprocess(one_column(v), cols, 0.0, 100.0);
  EXPECT_EQ(r.table.n_rows(), v.size());
  const auto z = r.table.column("v");
  EXPECT_NEAR(stats::mean(z), 0.0, 1e-12);
  EXPECT_NEAR(stats::stddev(z), 1.0, 1e-12);
  EXPECT_NEAR(r.scaling.inverse("v", z[1]), 9.0, 1e-12);
}

TEST(Preprocess, IdempotentOnStandardized) {
  const std::vector<double> v{0.3, -1.2, 2.5, 0.9, -0.4, 1.1, -2.0};
  const std::vector<std::string> cols{"v"};
  const auto once = preprocess(one_column(v), cols, 0.0, 100.0);
  const auto twice = preprocess(once.table, cols, 0.0, 100.0);
  EXPECT_EQ(twice.table.n_rows(), once.table.n_rows());
  EXPECT_NEAR(twice.scaling.entry("v").mean, 0.0, 1e-12);
  EXPECT_NEAR(twice.scaling.entry("v").stddev, 1.0, 1e-12);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(twice.table.at(i, 0), once.table.at(i, 0), 1e-9);
}

TEST(Preprocess, ConstantColumnRejected) {
  const std::vector<std::string> none;
  EXPECT_THROW(preprocess(one_column({2, 2, 2}), none), DataError);
}

TEST(SplitGroups, SmallerGroupIsG0) {
  std::vector<double> z(10244, 0.0);
  std::fill(z.begin(), z.begin() + 990, 1.0);
  const Table t({Column{"race", ColumnKind::binary, {}}}, z, z.size());
  const auto s = split_groups(t, "race");
  EXPECT_EQ(s.g0.size(), 990u);
  EXPECT_EQ(s.g1.size(), 9254u);
  EXPECT_EQ(s.g0_code, 1);
}

TEST(SplitGroups, EmptyGroupAndTies) {
  const Table all_one({Column{"z", ColumnKind::binary, {}}}, std::vector<double>(5, 1.0), 5);
  EXPECT_THROW(split_groups(all_one, "z"), DataError);
  std::vector<double> z(20, 0.0);
  std::fill(z.begin() + 10, z.end(), 1.0);
  const Table tie({Column{"z", ColumnKind::binary, {}}}, z, z.size());
  const auto s = split_groups(tie, "z");
  EXPECT_EQ(s.g0_code, 0);
  EXPECT_EQ(s.g0.front(), 0u);
  EXPECT_THROW(split_groups(one_column({1, 2}), "v"), DataError);
}

TEST(MakeFolds, StratifiedBalanced) {
  const auto split = split_of(50, 50);
  const auto plan = make_folds(100, 5, split, 42);
  for (int f = 0; f < 5; ++f) {
    const auto test = plan.test_rows(f);
    EXPECT_EQ(test.size(), 20u);
    EXPECT_EQ(std::count_if(test.begin(), test.end(), [](std::size_t r) { return r < 50; }), 10);
    EXPECT_EQ(plan.train_rows(f).size(), 80u);
  }
  EXPECT_EQ(make_folds(100, 5, split, 42).assignments, plan.assignments);
  EXPECT_NE(make_folds(100, 5, split, 43).assignments, plan.assignments);
}

TEST(MakeFolds, GroupSmallerThanK) { EXPECT_THROW(make_folds(13, 5, split_of(3, 10), 1), DataError); }

TEST(MakeFolds, LinkedRowsShareFoldAndSizesStayBalanced) {
  const auto split = split_of(23, 61);
  std::vector<std::pair<std::size_t, std::size_t>> linked;
  for (std::size_t i = 0; i < 17; ++i) linked.emplace_back(i, 23 + 2 * i);
  const auto plan = make_folds(84, 5, split, 9, linked);
  for (const auto& [a, b] : linked) EXPECT_EQ(plan.assignments[a], plan.assignments[b]);
  for (const auto* g : {&split.g0, &split.g1}) {
    std::vector<int> sizes(5, 0);
    for (std::size_t r : *g) ++sizes[static_cast<std::size_t>(plan.assignments[r])];
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1);
  }
}

TEST(MakeFolds, CsvExport) {
  std::ostringstream out;
  make_folds(20, 2, split_of(10, 10), 5).write_csv(out);
  const auto doc = csv::parse(out.str());
  EXPECT_EQ(doc.header, (csv::Row{"row_index", "fold"}));
  EXPECT_EQ(doc.rows.size(), 20u);
}
