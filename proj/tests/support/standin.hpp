#pragma once

#include <cstdint>
#include <string>

namespace cfair::testing {

/// Schema-compatible stand-in for the credentialed ICU cohort: numeric
/// vitals, binary gender, categorical insurance, a binary race column with a
/// ~10% minority that is confounded with age and insurance, and a 3-class
/// ventilation outcome NV / SO / IV.
std::string icu_standin_csv(int n_rows, std::uint64_t seed);
std::string icu_standin_schema_json();

}  // namespace cfair::testing
