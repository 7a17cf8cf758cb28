#include "cfair/compas.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>

#include "cfair/csv.hpp"
#include "cfair/error.hpp"

namespace cfair::compas {
namespace {

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("compas: bad " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

double parse_number(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("compas: non-numeric " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

double timestamp_seconds(std::string_view text) {
  if (text.size() < 10) throw DataError("compas: bad timestamp '" + std::string(text) + "'");
  using namespace std::chrono;
  const year_month_day ymd{year{parse_int(text.substr(0, 4), "year")},
                           month{static_cast<unsigned>(parse_int(text.substr(5, 2), "month"))},
                           day{static_cast<unsigned>(parse_int(text.substr(8, 2), "day"))}};
  if (!ymd.ok()) throw DataError("compas: invalid date '" + std::string(text) + "'");
  double seconds = static_cast<double>(sys_days{ymd}.time_since_epoch().count()) * 86400.0;
  if (text.size() >= 19) {
    seconds += parse_int(text.substr(11, 2), "hour") * 3600.0 + parse_int(text.substr(14, 2), "minute") * 60.0 +
               parse_int(text.substr(17, 2), "second");
  }
  return seconds;
}

std::size_t find_column(const csv::Row& header, std::string_view name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("compas: missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

Table build(const csv::Document& doc, LoadStats* stats) {
  const auto& h = doc.header;
  const std::size_t c_age = find_column(h, "age");
  const std::size_t c_sex = find_column(h, "sex");
  const std::size_t c_race = find_column(h, "race");
  const std::size_t c_decile = find_column(h, "decile_score");
  const std::size_t c_priors = find_column(h, "priors_count");
  const std::size_t c_jail_in = find_column(h, "c_jail_in");
  const std::size_t c_jail_out = find_column(h, "c_jail_out");
  const std::size_t c_days = find_column(h, "c_days_from_compas");
  const std::size_t c_vdecile = find_column(h, "v_decile_score");
  const bool has_is_recid = std::find(h.begin(), h.end(), "is_recid") != h.end();
  const std::size_t c_target = find_column(h, has_is_recid ? "is_recid" : "two_year_recid");

  LoadStats local;
  local.raw_rows = doc.rows.size();
  std::vector<double> values;
  std::size_t n = 0;
  for (const auto& row : doc.rows) {
    const std::string& race = row[c_race];
    if (race != "African-American" && race != "Caucasian") {
      ++local.other_race;
      continue;
    }
    const std::string& target = row[c_target];
    if (target.empty() || target == "-1") {
      ++local.missing_target;
      continue;
    }
    if (row[c_days].empty()) {
      ++local.missing_days_from_compas;
      continue;
    }
    double jail = 0.0;
    if (!row[c_jail_in].empty() && !row[c_jail_out].empty())
      jail = days_between(row[c_jail_in], row[c_jail_out]);
    const std::string& sex = row[c_sex];
    if (sex != "Male" && sex != "Female") throw DataError("compas: unexpected sex '" + sex + "'");
    const double y = parse_number(target, "target");
    if (y != 0.0 && y != 1.0) throw DataError("compas: target must be 0/1, got '" + target + "'");
    values.insert(values.end(), {jail, parse_number(row[c_age], "age"), sex == "Male" ? 1.0 : 0.0,
                                 parse_number(row[c_decile], "decile_score"),
                                 parse_number(row[c_priors], "priors_count"),
                                 parse_number(row[c_days], "c_days_from_compas"),
                                 parse_number(row[c_vdecile], "v_decile_score"),
                                 race == "African-American" ? 1.0 : 0.0, y});
    ++n;
  }
  if (stats) *stats = local;
  if (n == 0) throw DataError("compas: no usable rows");
  std::vector<Column> columns = {
      {"days_in_jail", ColumnKind::numeric, {}},    {"age", ColumnKind::numeric, {}},
      {"sex", ColumnKind::binary, {}},              {"decile_score", ColumnKind::numeric, {}},
      {"priors_count", ColumnKind::numeric, {}},    {"days_from_compas", ColumnKind::numeric, {}},
      {"v_decile_score", ColumnKind::numeric, {}},  {std::string(kProtectedColumn), ColumnKind::binary, {}},
      {std::string(kTargetColumn), ColumnKind::binary, {}},
  };
  return Table(std::move(columns), std::move(values), n);
}

}  // namespace

std::vector<std::string> feature_names() {
  return {"days_in_jail", "age", "sex", "decile_score", "priors_count", "days_from_compas", "v_decile_score"};
}

double days_between(std::string_view a, std::string_view b) {
  return (timestamp_seconds(b) - timestamp_seconds(a)) / 86400.0;
}

Table load(const std::string& path, LoadStats* stats) { return build(csv::read_file(path), stats); }

Table parse(std::string_view csv_text, LoadStats* stats) { return build(csv::parse(csv_text), stats); }

}  // namespace cfair::compas
