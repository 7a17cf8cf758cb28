#include "cfair/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cfair/error.hpp"

namespace cfair::stats {

double mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mean of empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  if (values.size() < 2) throw DataError("variance needs at least two values");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

double stddev(std::span<const double> values) { return std::sqrt(variance(values)); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) return h;
  }
  throw NumericalError("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw NumericalError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  // The fraction converges fast for x < (a+1)/(a+b+2); use symmetry otherwise.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw NumericalError("t distribution needs df > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

double two_sided_p(double t, double df) {
  if (std::isnan(t)) return 1.0;
  const double x = df / (df + t * t);
  const double p = incomplete_beta(0.5 * df, 0.5, x);
  return std::clamp(p, 0.0, 1.0);
}

namespace {

double interpolate_sorted_rank(std::vector<double>& values, double q, bool partial) {
  if (values.empty()) throw DataError("percentile of empty sample");
  if (!(q >= 0.0 && q <= 100.0)) throw ConfigError("percentile must be within [0, 100]");
  const std::size_t n = values.size();
  const double h = (static_cast<double>(n) - 1.0) * q / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);
  if (!partial) {
    std::sort(values.begin(), values.end());
    if (lo + 1 >= n) return values[n - 1];
    return values[lo] + frac * (values[lo + 1] - values[lo]);
  }
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double below = values[lo];
  if (lo + 1 >= n || frac == 0.0) return below;
  const double above = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return below + frac * (above - below);
}

}  // namespace

double percentile(std::span<const double> values, double q) {
  std::vector<double> copy(values.begin(), values.end());
  return interpolate_sorted_rank(copy, q, false);
}

double percentile_inplace(std::vector<double>& values, double q) {
  return interpolate_sorted_rank(values, q, true);
}

namespace {

TTestResult degenerate_result(double mean_difference, double df, TTestFlavor flavor) {
  TTestResult r;
  r.flavor = flavor;
  r.degenerate = true;
  r.degrees_of_freedom = df;
  if (mean_difference == 0.0) {
    r.statistic = 0.0;
    r.p_value = 1.0;
  } else {
    r.statistic = std::copysign(std::numeric_limits<double>::infinity(), mean_difference);
    r.p_value = 0.0;
  }
  return r;
}

}  // namespace

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired t-test: length mismatch");
  if (a.size() < 2) throw DataError("paired t-test needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double n = static_cast<double>(d.size());
  const double md = mean(d);
  const double sd = stddev(d);
  const double df = n - 1.0;
  if (sd == 0.0) return degenerate_result(md, df, TTestFlavor::paired);
  TTestResult r;
  r.flavor = TTestFlavor::paired;
  r.statistic = md / (sd / std::sqrt(n));
  r.degrees_of_freedom = df;
  r.p_value = two_sided_p(r.statistic, df);
  return r;
}

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b,
                             TTestFlavor flavor) {
  if (a.size() < 2 || b.size() < 2) throw DataError("two-sample t-test needs n >= 2 per sample");
  if (flavor == TTestFlavor::paired) throw ConfigError("two-sample t-test: flavor must be student or welch");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double diff = mean(a) - mean(b);
  const double va = variance(a);
  const double vb = variance(b);
  TTestResult r;
  r.flavor = flavor;
  if (flavor == TTestFlavor::student) {
    const double df = na + nb - 2.0;
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    if (pooled == 0.0) return degenerate_result(diff, df, flavor);
    r.statistic = diff / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
    r.degrees_of_freedom = df;
  } else {
    const double sa = va / na;
    const double sb = vb / nb;
    if (sa + sb == 0.0) return degenerate_result(diff, na + nb - 2.0, flavor);
    r.statistic = diff / std::sqrt(sa + sb);
    r.degrees_of_freedom = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  }
  r.p_value = two_sided_p(r.statistic, r.degrees_of_freedom);
  return r;
}

double FoldedNormalStats::pdf(double x) const {
  if (x < 0.0) return 0.0;
  const double s = params.sigma1;
  return (normal_pdf((x - params.delta_nu) / s) + normal_pdf((x + params.delta_nu) / s)) / s;
}

FoldedNormalStats folded_normal_stats(FoldedNormalParams params) {
  if (!(params.sigma1 > 0.0)) throw ConfigError("folded normal: sigma1 must be positive");
  const double dn = params.delta_nu;
  const double s = params.sigma1;
  FoldedNormalStats out;
  out.params = params;
  const double tail = normal_cdf(-dn / s);
  out.mean = std::sqrt(2.0 / std::numbers::pi) * s * std::exp(-dn * dn / (2.0 * s * s)) +
             dn * (1.0 - 2.0 * tail);
  out.variance = dn * dn + s * s - out.mean * out.mean;
  // The Gaussian terms of the product rule cancel, leaving 1 - 2*Phi(-dnu/sigma1).
  out.mean_derivative = 1.0 - 2.0 * tail;
  return out;
}

double folded_sigma1(double sigma, double n0, double n1) {
  if (!(sigma > 0.0) || !(n0 > 0.0) || !(n1 > 0.0)) throw ConfigError("folded_sigma1: arguments must be positive");
  return std::sqrt(sigma * sigma / n0 + sigma * sigma / n1);
}

}  // namespace cfair::stats
