#pragma once

#include <span>
#include <vector>

namespace cfair::stats {

double mean(std::span<const double> values);
/// Sample variance with the n-1 denominator. Requires at least two values.
double variance(std::span<const double> values);
double stddev(std::span<const double> values);

/// Standard normal CDF.
double normal_cdf(double x);
double normal_pdf(double x);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Student t CDF with (possibly fractional) degrees of freedom.
double student_t_cdf(double t, double df);

/// Two-sided p-value for a t statistic.
double two_sided_p(double t, double df);

/// Percentile by linear interpolation between closest ranks (numpy "linear").
/// q is in percent, 0 <= q <= 100. The input is copied; order is irrelevant.
double percentile(std::span<const double> values, double q);

/// Same convention, but reorders `values` in place (no copy). Used for large
/// pair-difference arrays.
double percentile_inplace(std::vector<double>& values, double q);

enum class TTestFlavor { paired, student, welch };

struct TTestResult {
  double statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  TTestFlavor flavor = TTestFlavor::paired;
  /// Zero variance: the statistic is undefined and p is 1 for equal means, 0 otherwise.
  bool degenerate = false;
};

/// Paired t-test on a - b, two-sided, df = n - 1.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

/// Pooled-variance (student) or Welch-Satterthwaite two-sample test, two-sided.
TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b,
                             TTestFlavor flavor = TTestFlavor::welch);

// Folded normal model of the DP-gap estimator |Ybar0 - Ybar1| where the
// difference of group means is N(delta_nu, sigma1^2).

struct FoldedNormalParams {
  double delta_nu = 0.0;
  double sigma1 = 1.0;
};

struct FoldedNormalStats {
  FoldedNormalParams params;
  double mean = 0.0;
  double variance = 0.0;
  /// d mean / d delta_nu.
  double mean_derivative = 0.0;

  /// Density at x; zero for x < 0.
  double pdf(double x) const;
};

FoldedNormalStats folded_normal_stats(FoldedNormalParams params);

/// sigma1 for two groups of sizes n0, n1 sharing per-sample stddev sigma.
double folded_sigma1(double sigma, double n0, double n1);

}  // namespace cfair::stats
