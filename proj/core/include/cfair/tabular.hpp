#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cfair {

enum class ColumnKind { numeric, binary, categorical };

const char* to_string(ColumnKind kind) noexcept;
ColumnKind column_kind_from_string(std::string_view text);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  /// Category labels in code order (categorical columns only).
  std::vector<std::string> levels;
};

/// Declared column kinds plus the optional target column whose missing cells
/// cause a row to be dropped rather than rejected.
struct Schema {
  std::vector<std::pair<std::string, ColumnKind>> columns;
  std::string target;

  /// {"columns": {"age": "numeric", ...} or [{"name":..,"kind":..}], "target": "y"}
  static Schema from_json(std::string_view text);
  static Schema from_json_file(const std::string& path);
  std::string to_json() const;
};

/// Immutable column-typed table. Values are stored row-major as doubles;
/// categorical cells hold integer codes 0..levels-1.
class Table {
 public:
  Table() = default;
  Table(std::vector<Column> columns, std::vector<double> values, std::size_t n_rows);

  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return columns_.size(); }
  const std::vector<Column>& columns() const noexcept { return columns_; }

  bool has_column(std::string_view name) const noexcept;
  /// Throws DataError for unknown names.
  std::size_t column_index(std::string_view name) const;
  const Column& column_info(std::string_view name) const { return columns_[column_index(name)]; }

  double at(std::size_t row, std::size_t col) const { return values_[row * columns_.size() + col]; }
  std::vector<double> column(std::string_view name) const;
  std::vector<double> column(std::string_view name, std::span<const std::size_t> rows) const;
  /// Integer view of a binary or categorical column.
  std::vector<int> labels(std::string_view name) const;

  Table select_rows(std::span<const std::size_t> rows) const;

  /// Raw numeric matrix of the named columns (no one-hot expansion).
  Eigen::MatrixXd matrix(std::span<const std::string> names) const;
  Eigen::MatrixXd matrix(std::span<const std::string> names, std::span<const std::size_t> rows) const;

  std::vector<std::string> column_names() const;

  /// Header + rows; categorical cells written as their labels.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<Column> columns_;
  std::vector<double> values_;
  std::size_t n_rows_ = 0;
};

Table load_table(const std::string& path, const Schema& schema);
Table parse_table(std::string_view csv_text, const Schema& schema);

struct ScalingEntry {
  std::string column;
  double mean = 0.0;
  double stddev = 1.0;
};

/// Z-score transform applied to numeric columns.
struct ScalingParams {
  std::vector<ScalingEntry> entries;

  const ScalingEntry& entry(std::string_view column) const;
  double inverse(std::string_view column, double scaled) const;
};

struct PreprocessResult {
  Table table;
  ScalingParams scaling;
  /// Row indices of the input that survived outlier filtering.
  std::vector<std::size_t> kept_rows;
};

/// Drops rows where any listed column falls outside its [lo_pct, hi_pct]
/// percentile (computed over all input rows), then z-scores every numeric
/// column not listed in `unscaled`.
PreprocessResult preprocess(const Table& table, std::span<const std::string> outlier_columns,
                            double lo_pct = 2.5, double hi_pct = 97.5,
                            std::span<const std::string> unscaled = {});

/// g0 is the smaller group (code 0 on ties).
struct GroupSplit {
  std::vector<std::size_t> g0;
  std::vector<std::size_t> g1;
  std::string protected_column;
  int g0_code = 0;

  /// 0 or 1 for every table row.
  std::vector<int> membership(std::size_t n_rows) const;
};

GroupSplit split_groups(const Table& table, std::string_view protected_column);

struct FoldPlan {
  int k = 0;
  std::vector<int> assignments;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_rows(int fold) const;
  std::vector<std::size_t> train_rows(int fold) const;
  void write_csv(std::ostream& out) const;
};

/// Stratified k-fold plan: each group is shuffled with `seed` and dealt
/// round-robin. Rows joined in `linked` (g0 row, g1 row) always share a fold.
FoldPlan make_folds(std::size_t n_rows, int k, const GroupSplit& groups, std::uint64_t seed,
                    std::span<const std::pair<std::size_t, std::size_t>> linked = {});

}  // namespace cfair
