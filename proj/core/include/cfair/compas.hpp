#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cfair/tabular.hpp"

namespace cfair::compas {

/// Adapter for the public ProPublica COMPAS files (compas-scores.csv or
/// compas-scores-two-years.csv). Produces a table with:
///
///   days_in_jail      numeric  (c_jail_out - c_jail_in) in days; 0 when either date is empty
///   age               numeric  age
///   sex               binary   sex: Male = 1, Female = 0
///   decile_score      numeric  first decile_score column
///   priors_count      numeric  first priors_count column
///   days_from_compas  numeric  c_days_from_compas; rows with an empty cell are dropped
///   v_decile_score    numeric  v_decile_score
///   race              binary   African-American = 1, Caucasian = 0; other races dropped
///   recidivism        binary   is_recid when present, else two_year_recid; -1 or empty dropped
struct LoadStats {
  std::size_t raw_rows = 0;
  std::size_t other_race = 0;
  std::size_t missing_target = 0;
  std::size_t missing_days_from_compas = 0;
};

inline constexpr std::string_view kProtectedColumn = "race";
inline constexpr std::string_view kTargetColumn = "recidivism";

std::vector<std::string> feature_names();

Table load(const std::string& path, LoadStats* stats = nullptr);
Table parse(std::string_view csv_text, LoadStats* stats = nullptr);

/// Days between two "YYYY-MM-DD[ HH:MM:SS]" timestamps (b - a), fractional.
double days_between(std::string_view a, std::string_view b);

}  // namespace cfair::compas
