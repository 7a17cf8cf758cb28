#include "standin.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cfair::testing {

std::string icu_standin_csv(int n_rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const char* insurance[] = {"Medicare", "Medicaid", "Private"};
  const char* outcome[] = {"NV", "SO", "IV"};

  std::ostringstream out;
  out << "age,heart_rate,resp_rate,spo2,gender,insurance,race,ventilation\n";
  for (int i = 0; i < n_rows; ++i) {
    const int race = u(rng) < 0.1 ? 1 : 0;
    const double age = 65.0 - 6.0 * race + 12.0 * z(rng);
    const double hr = 85.0 + 3.0 * race + 14.0 * z(rng);
    const double rr = 19.0 + 4.0 * z(rng);
    const double spo2 = 96.0 - 0.5 * race + 2.0 * z(rng);
    const int gender = u(rng) < 0.45 + 0.1 * race ? 1 : 0;
    const double r = u(rng);
    const int ins = race ? (r < 0.3 ? 0 : r < 0.75 ? 1 : 2) : (r < 0.5 ? 0 : r < 0.65 ? 1 : 2);

    double logit[3] = {0.0, 0.02 * (hr - 85.0) - 0.2 * (spo2 - 96.0), 0.03 * (rr - 19.0) - 0.35 * (spo2 - 96.0) - 0.5};
    const double top = *std::max_element(logit, logit + 3);
    double p[3], sum = 0.0;
    for (int c = 0; c < 3; ++c) sum += p[c] = std::exp(logit[c] - top);
    double draw = u(rng) * sum;
    int y = 0;
    while (y < 2 && draw > p[y]) draw -= p[y++];

    out << age << ',' << hr << ',' << rr << ',' << spo2 << ',' << gender << ',' << insurance[ins] << ',' << race
        << ',' << outcome[y] << '\n';
  }
  return out.str();
}

std::string icu_standin_schema_json() {
  return R"({"columns": {"age": "numeric", "heart_rate": "numeric", "resp_rate": "numeric", "spo2": "numeric",
"gender": "binary", "insurance": "categorical", "race": "binary", "ventilation": "categorical"},
"target": "ventilation"})";
}

}  // namespace cfair::testing
