#include "cfair/tabular.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "cfair/csv.hpp"
#include "cfair/error.hpp"
#include "cfair/stats.hpp"

namespace cfair {

const char* to_string(ColumnKind kind) noexcept {
  switch (kind) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::binary: return "binary";
    case ColumnKind::categorical: return "categorical";
  }
  return "numeric";
}

ColumnKind column_kind_from_string(std::string_view text) {
  if (text == "numeric") return ColumnKind::numeric;
  if (text == "binary") return ColumnKind::binary;
  if (text == "categorical") return ColumnKind::categorical;
  throw ConfigError("unknown column kind '" + std::string(text) + "'");
}

Schema Schema::from_json(std::string_view text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ConfigError(std::string("schema: ") + e.what());
  }
  Schema schema;
  if (!doc.contains("columns")) throw ConfigError("schema: missing 'columns'");
  const auto& cols = doc.at("columns");
  if (cols.is_object()) {
    for (const auto& [name, kind] : cols.items())
      schema.columns.emplace_back(name, column_kind_from_string(kind.get<std::string>()));
  } else if (cols.is_array()) {
    for (const auto& c : cols)
      schema.columns.emplace_back(c.at("name").get<std::string>(),
                                  column_kind_from_string(c.at("kind").get<std::string>()));
  } else {
    throw ConfigError("schema: 'columns' must be an object or array");
  }
  if (doc.contains("target")) schema.target = doc.at("target").get<std::string>();
  if (!schema.target.empty() &&
      std::none_of(schema.columns.begin(), schema.columns.end(),
                   [&](const auto& c) { return c.first == schema.target; }))
    throw ConfigError("schema: target '" + schema.target + "' is not a declared column");
  return schema;
}

Schema Schema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read schema file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string Schema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& [name, kind] : columns) cols.push_back({{"name", name}, {"kind", to_string(kind)}});
  nlohmann::json doc = {{"columns", cols}};
  if (!target.empty()) doc["target"] = target;
  return doc.dump(2);
}

Table::Table(std::vector<Column> columns, std::vector<double> values, std::size_t n_rows)
    : columns_(std::move(columns)), values_(std::move(values)), n_rows_(n_rows) {
  if (values_.size() != n_rows_ * columns_.size())
    throw DataError("table: value count does not match rows x columns");
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const Column& col = columns_[c];
    for (std::size_t r = 0; r < n_rows_; ++r) {
      const double v = at(r, c);
      if (!std::isfinite(v)) throw DataError("table: non-finite value in column '" + col.name + "'");
      if (col.kind == ColumnKind::binary && v != 0.0 && v != 1.0)
        throw DataError("table: binary column '" + col.name + "' holds a value other than 0/1");
      if (col.kind == ColumnKind::categorical &&
          (v < 0.0 || v != std::floor(v) || v >= static_cast<double>(col.levels.size())))
        throw DataError("table: categorical column '" + col.name + "' holds an invalid code");
    }
  }
}

bool Table::has_column(std::string_view name) const noexcept {
  return std::any_of(columns_.begin(), columns_.end(), [&](const Column& c) { return c.name == name; });
}

std::size_t Table::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].name == name) return i;
  throw DataError("unknown column '" + std::string(name) + "'");
}

std::vector<double> Table::column(std::string_view name) const {
  const std::size_t c = column_index(name);
  std::vector<double> out(n_rows_);
  for (std::size_t r = 0; r < n_rows_; ++r) out[r] = at(r, c);
  return out;
}

std::vector<double> Table::column(std::string_view name, std::span<const std::size_t> rows) const {
  const std::size_t c = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(at(r, c));
  return out;
}

std::vector<int> Table::labels(std::string_view name) const {
  const std::size_t c = column_index(name);
  if (columns_[c].kind == ColumnKind::numeric)
    throw DataError("column '" + std::string(name) + "' is numeric, expected class labels");
  std::vector<int> out(n_rows_);
  for (std::size_t r = 0; r < n_rows_; ++r) out[r] = static_cast<int>(at(r, c));
  return out;
}

Table Table::select_rows(std::span<const std::size_t> rows) const {
  std::vector<double> values;
  values.reserve(rows.size() * columns_.size());
  for (std::size_t r : rows) {
    if (r >= n_rows_) throw DataError("select_rows: row index out of range");
    values.insert(values.end(), values_.begin() + static_cast<std::ptrdiff_t>(r * columns_.size()),
                  values_.begin() + static_cast<std::ptrdiff_t>((r + 1) * columns_.size()));
  }
  return Table(columns_, std::move(values), rows.size());
}

Eigen::MatrixXd Table::matrix(std::span<const std::string> names) const {
  std::vector<std::size_t> all(n_rows_);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return matrix(names, all);
}

Eigen::MatrixXd Table::matrix(std::span<const std::string> names, std::span<const std::size_t> rows) const {
  std::vector<std::size_t> cols;
  cols.reserve(names.size());
  for (const auto& n : names) cols.push_back(column_index(n));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = at(rows[i], cols[j]);
  return m;
}

std::vector<std::string> Table::column_names() const {
  std::vector<std::string> names;
  for (const auto& c : columns_) names.push_back(c.name);
  return names;
}

void Table::write_csv(std::ostream& out) const {
  csv::Writer writer(out, "cfair.table/1", column_names());
  csv::Row row(columns_.size());
  for (std::size_t r = 0; r < n_rows_; ++r) {
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      const double v = at(r, c);
      row[c] = columns_[c].kind == ColumnKind::categorical ? columns_[c].levels[static_cast<std::size_t>(v)]
                                                           : csv::format_number(v);
    }
    writer.row(row);
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_missing(std::string_view cell) {
  cell = trim(cell);
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

bool parse_double(std::string_view cell, double& out) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

Table build_table(const csv::Document& doc, const Schema& schema) {
  if (schema.columns.empty()) throw ConfigError("schema declares no columns");
  std::vector<std::size_t> source;
  for (const auto& [name, kind] : schema.columns) {
    auto it = std::find(doc.header.begin(), doc.header.end(), name);
    if (it == doc.header.end()) throw DataError("unknown column '" + name + "': not in CSV header");
    source.push_back(static_cast<std::size_t>(it - doc.header.begin()));
  }
  std::vector<Column> columns;
  for (const auto& [name, kind] : schema.columns) columns.push_back(Column{name, kind, {}});
  std::vector<std::unordered_map<std::string, int>> codes(columns.size());

  std::size_t target = columns.size();
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (!schema.target.empty() && columns[c].name == schema.target) target = c;

  std::vector<double> values;
  std::size_t n_rows = 0;
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    const auto& row = doc.rows[r];
    if (target < columns.size() && is_missing(row[source[target]])) continue;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const std::string& cell = row[source[c]];
      const std::string where = "row " + std::to_string(r + 1) + ", column '" + columns[c].name + "'";
      if (is_missing(cell)) throw DataError("missing value at " + where);
      double v = 0.0;
      switch (columns[c].kind) {
        case ColumnKind::numeric:
          if (!parse_double(cell, v)) throw DataError("non-numeric token '" + cell + "' at " + where);
          break;
        case ColumnKind::binary:
          if (!parse_double(cell, v) || (v != 0.0 && v != 1.0))
            throw DataError("binary column expects 0/1, got '" + cell + "' at " + where);
          break;
        case ColumnKind::categorical: {
          const std::string key(trim(cell));
          auto [it, inserted] = codes[c].try_emplace(key, static_cast<int>(columns[c].levels.size()));
          if (inserted) columns[c].levels.push_back(key);
          v = it->second;
          break;
        }
      }
      values.push_back(v);
    }
    ++n_rows;
  }
  if (n_rows == 0) throw DataError("table is empty after ingestion");
  return Table(std::move(columns), std::move(values), n_rows);
}

}  // namespace

Table parse_table(std::string_view csv_text, const Schema& schema) {
  return build_table(csv::parse(csv_text), schema);
}

Table load_table(const std::string& path, const Schema& schema) {
  return build_table(csv::read_file(path), schema);
}

const ScalingEntry& ScalingParams::entry(std::string_view column) const {
  for (const auto& e : entries)
    if (e.column == column) return e;
  throw DataError("no scaling recorded for column '" + std::string(column) + "'");
}

double ScalingParams::inverse(std::string_view column, double scaled) const {
  const auto& e = entry(column);
  return scaled * e.stddev + e.mean;
}

PreprocessResult preprocess(const Table& table, std::span<const std::string> outlier_columns,
                            double lo_pct, double hi_pct, std::span<const std::string> unscaled) {
  if (!(lo_pct >= 0.0 && hi_pct <= 100.0 && lo_pct <= hi_pct))
    throw ConfigError("preprocess: percentiles must satisfy 0 <= lo <= hi <= 100");
  std::vector<char> keep(table.n_rows(), 1);
  for (const auto& name : outlier_columns) {
    if (table.column_info(name).kind != ColumnKind::numeric)
      throw DataError("outlier column '" + name + "' is not numeric");
    const auto values = table.column(name);
    const double lo = stats::percentile(values, lo_pct);
    const double hi = stats::percentile(values, hi_pct);
    for (std::size_t r = 0; r < values.size(); ++r)
      if (values[r] < lo || values[r] > hi) keep[r] = 0;
  }
  PreprocessResult result;
  for (std::size_t r = 0; r < keep.size(); ++r)
    if (keep[r]) result.kept_rows.push_back(r);
  if (result.kept_rows.empty()) throw DataError("preprocess: no rows left after outlier filtering");

  const Table filtered = table.select_rows(result.kept_rows);
  const std::size_t n = filtered.n_rows();
  std::vector<double> values(n * filtered.n_cols());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < filtered.n_cols(); ++c) values[r * filtered.n_cols() + c] = filtered.at(r, c);

  for (std::size_t c = 0; c < filtered.n_cols(); ++c) {
    const Column& col = filtered.columns()[c];
    if (col.kind != ColumnKind::numeric) continue;
    if (std::find(unscaled.begin(), unscaled.end(), col.name) != unscaled.end()) continue;
    if (n < 2) throw DataError("preprocess: need at least two rows to standardize");
    const auto column = filtered.column(col.name);
    const double m = stats::mean(column);
    const double sd = stats::stddev(column);
    if (!(sd > 0.0)) throw DataError("preprocess: column '" + col.name + "' is constant");
    for (std::size_t r = 0; r < n; ++r) values[r * filtered.n_cols() + c] = (column[r] - m) / sd;
    result.scaling.entries.push_back({col.name, m, sd});
  }
  result.table = Table(filtered.columns(), std::move(values), n);
  return result;
}

std::vector<int> GroupSplit::membership(std::size_t n_rows) const {
  std::vector<int> out(n_rows, -1);
  for (std::size_t r : g0) out.at(r) = 0;
  for (std::size_t r : g1) out.at(r) = 1;
  return out;
}

GroupSplit split_groups(const Table& table, std::string_view protected_column) {
  const Column& col = table.column_info(protected_column);
  if (col.kind != ColumnKind::binary)
    throw DataError("protected column '" + std::string(protected_column) + "' is not binary");
  std::vector<std::size_t> zeros, ones;
  const std::size_t c = table.column_index(protected_column);
  for (std::size_t r = 0; r < table.n_rows(); ++r) (table.at(r, c) == 0.0 ? zeros : ones).push_back(r);
  if (zeros.empty() || ones.empty())
    throw DataError("protected column '" + std::string(protected_column) + "' leaves a group empty");
  GroupSplit split;
  split.protected_column = std::string(protected_column);
  if (ones.size() < zeros.size()) {
    split.g0 = std::move(ones);
    split.g1 = std::move(zeros);
    split.g0_code = 1;
  } else {
    split.g0 = std::move(zeros);
    split.g1 = std::move(ones);
    split.g0_code = 0;
  }
  return split;
}

std::vector<std::size_t> FoldPlan::test_rows(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < assignments.size(); ++r)
    if (assignments[r] == fold) rows.push_back(r);
  return rows;
}

std::vector<std::size_t> FoldPlan::train_rows(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < assignments.size(); ++r)
    if (assignments[r] >= 0 && assignments[r] != fold) rows.push_back(r);
  return rows;
}

void FoldPlan::write_csv(std::ostream& out) const {
  csv::Writer writer(out, "cfair.folds/1", {"row_index", "fold"});
  for (std::size_t r = 0; r < assignments.size(); ++r)
    writer.row({std::to_string(r), std::to_string(assignments[r])});
}

FoldPlan make_folds(std::size_t n_rows, int k, const GroupSplit& groups, std::uint64_t seed,
                    std::span<const std::pair<std::size_t, std::size_t>> linked) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  const auto uk = static_cast<std::size_t>(k);
  if (groups.g0.size() < uk || groups.g1.size() < uk)
    throw DataError("each group needs at least k=" + std::to_string(k) + " rows for stratified folds");

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(n_rows, -1);
  std::mt19937_64 rng(seed);

  std::vector<char> in_pair(n_rows, 0);
  std::vector<std::pair<std::size_t, std::size_t>> pairs(linked.begin(), linked.end());
  for (const auto& [a, b] : pairs) {
    if (a >= n_rows || b >= n_rows) throw DataError("linked row index out of range");
    if (in_pair[a] || in_pair[b]) throw DataError("a row appears in more than one linked pair");
    in_pair[a] = in_pair[b] = 1;
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int fold = static_cast<int>(i % uk);
    plan.assignments[pairs[i].first] = fold;
    plan.assignments[pairs[i].second] = fold;
  }
  // Unlinked rows continue the round-robin where the pairs stopped, so each
  // group's fold sizes still differ by at most one.
  for (const auto* group : {&groups.g0, &groups.g1}) {
    std::vector<std::size_t> rest;
    for (std::size_t r : *group) {
      if (r >= n_rows) throw DataError("group index out of range");
      if (!in_pair[r]) rest.push_back(r);
    }
    std::shuffle(rest.begin(), rest.end(), rng);
    for (std::size_t i = 0; i < rest.size(); ++i)
      plan.assignments[rest[i]] = static_cast<int>((pairs.size() + i) % uk);
  }
  return plan;
}

}  // namespace cfair
