#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include "cfair/error.hpp"
#include "cfair/stats.hpp"
#include "oracles.hpp"

namespace stats = cfair::stats;

TEST(Percentile, MedianOfOneToTen) {
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  EXPECT_DOUBLE_EQ(stats::percentile(v, 50.0), 5.5);
  EXPECT_NEAR(stats::percentile(v, 90.0), 9.1, 1e-12);
}

TEST(Percentile, SingletonAnyQ) {
  std::vector<double> v{4.25};
  for (double q : {0.0, 13.0, 50.0, 100.0}) EXPECT_DOUBLE_EQ(stats::percentile(v, q), 4.25);
}

TEST(Percentile, UpperTailOfOneToHundred) {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  EXPECT_NEAR(stats::percentile(v, 97.5), 97.525, 1e-12);
  EXPECT_NEAR(stats::percentile(v, 2.5), 3.475, 1e-12);
}

TEST(Percentile, MatchesNaiveRuleOnRandomData) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> v(1 + rep);
    for (double& x : v) x = u(rng);
    for (double q : {0.0, 2.5, 33.3, 90.0, 100.0}) {
      EXPECT_NEAR(stats::percentile(v, q), cfair::testing::naive_percentile(v, q), 1e-12);
      auto copy = v;
      EXPECT_NEAR(stats::percentile_inplace(copy, q), cfair::testing::naive_percentile(v, q), 1e-12);
    }
  }
}

TEST(Percentile, Errors) {
  std::vector<double> empty;
  EXPECT_THROW(stats::percentile(empty, 50), cfair::DataError);
  std::vector<double> v{1.0};
  EXPECT_THROW(stats::percentile(v, 101), cfair::Error);
}

TEST(NormalCdf, ReferenceValues) {
  // High-precision references (mpmath).
  EXPECT_NEAR(stats::normal_cdf(0.0), 0.5, 1e-7);
  EXPECT_NEAR(stats::normal_cdf(1.0), 0.841344746068543, 1e-7);
  EXPECT_NEAR(stats::normal_cdf(-1.0), 1.0 - 0.841344746068543, 1e-7);
  EXPECT_NEAR(stats::normal_cdf(2.0), 0.977249868051821, 1e-7);
  EXPECT_NEAR(stats::normal_cdf(-2.0), 1.0 - 0.977249868051821, 1e-7);
  EXPECT_NEAR(stats::normal_cdf(6.0), 0.999999999013412, 1e-7);
  EXPECT_NEAR(stats::normal_cdf(-6.0), 9.86587645037698e-10, 1e-7);
}

TEST(StudentT, ReferenceValuesAtTwo) {
  const double ref[] = {0.8524163823495667, 0.9490302605850709, 0.9726874775185085, 0.9771148267533741};
  const double dfs[] = {1, 5, 30, 1000};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(stats::student_t_cdf(2.0, dfs[i]), ref[i], 1e-6) << "df " << dfs[i];
}

TEST(StudentT, AgreesWithBoostAcrossGrid) {
  for (double df : {0.5, 1.0, 2.0, 3.7, 10.0, 50.0, 400.0})
    for (double t : {-30.0, -4.0, -1.0, -0.1, 0.0, 0.3, 1.5, 2.5, 8.0}) {
      boost::math::students_t dist(df);
      EXPECT_NEAR(stats::student_t_cdf(t, df), boost::math::cdf(dist, t), 1e-9) << "t=" << t << " df=" << df;
    }
}

TEST(PairedTTest, EqualSamplesAreDegenerate) {
  std::vector<double> a{1, 2, 3};
  const auto r = stats::paired_ttest(a, a);
  EXPECT_TRUE(r.degenerate);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
}

TEST(PairedTTest, ZeroMeanDifference) {
  std::vector<double> a{1, -1, 0, 0}, b{0, 0, 0, 0};
  const auto r = stats::paired_ttest(a, b);
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.degrees_of_freedom, 3.0);
}

TEST(PairedTTest, HandComputedExample) {
  // d = {2,3,4}: mean 3, sd 1, t = 3*sqrt(3), df 2.
  std::vector<double> a{3, 4, 5}, b{1, 1, 1};
  const auto r = stats::paired_ttest(a, b);
  EXPECT_NEAR(r.statistic, 3.0 * std::sqrt(3.0), 1e-12);
  EXPECT_DOUBLE_EQ(r.degrees_of_freedom, 2.0);
  EXPECT_NEAR(r.p_value, 0.0350987, 1e-4);
  boost::math::students_t dist(2.0);
  EXPECT_NEAR(r.p_value, 2.0 * boost::math::cdf(boost::math::complement(dist, r.statistic)), 1e-10);
}

TEST(PairedTTest, Errors) {
  std::vector<double> a{1, 2}, b{1};
  EXPECT_THROW(stats::paired_ttest(a, b), cfair::DataError);
  std::vector<double> one{1};
  EXPECT_THROW(stats::paired_ttest(one, one), cfair::DataError);
}

TEST(PairedTTest, InvariantUnderCommonShift) {
  std::vector<double> a{0.2, 0.9, 0.4, 0.7, 0.5}, b{0.1, 0.3, 0.5, 0.2, 0.4};
  const auto base = stats::paired_ttest(a, b);
  for (double c : {-3.0, 0.5, 10.0}) {
    auto a2 = a, b2 = b;
    for (auto& x : a2) x += c;
    for (auto& x : b2) x += c;
    EXPECT_NEAR(stats::paired_ttest(a2, b2).p_value, base.p_value, 1e-9);
  }
}

TEST(TwoSampleTTest, IdenticalMultisets) {
  std::vector<double> a{1, 5, 2, 8}, b{8, 2, 5, 1};
  for (auto flavor : {stats::TTestFlavor::student, stats::TTestFlavor::welch}) {
    const auto r = stats::two_sample_ttest(a, b, flavor);
    EXPECT_NEAR(r.statistic, 0.0, 1e-12);
    EXPECT_NEAR(r.p_value, 1.0, 1e-12);
  }
}

TEST(TwoSampleTTest, ConstantDifferentSamplesDegenerate) {
  std::vector<double> a{0, 0}, b{1, 1};
  const auto r = stats::two_sample_ttest(a, b, stats::TTestFlavor::student);
  EXPECT_TRUE(r.degenerate);
  EXPECT_DOUBLE_EQ(r.p_value, 0.0);
}

TEST(TwoSampleTTest, StudentHandComputed) {
  // Pooled variance 5/3, SE sqrt(5/3 * 1/2); t = -1/SE.
  std::vector<double> a{1, 2, 3, 4}, b{2, 3, 4, 5};
  const auto r = stats::two_sample_ttest(a, b, stats::TTestFlavor::student);
  EXPECT_NEAR(r.statistic, -1.0 / std::sqrt(5.0 / 6.0), 1e-12);
  EXPECT_NEAR(r.statistic, -1.0954451, 1e-6);
  EXPECT_DOUBLE_EQ(r.degrees_of_freedom, 6.0);
  EXPECT_NEAR(r.p_value, 0.3153336, 1e-4);
}

TEST(TwoSampleTTest, WelchUnequalVariances) {
  std::vector<double> a{1, 2, 3, 4, 10}, b{2, 3, 4};
  const auto w = stats::two_sample_ttest(a, b, stats::TTestFlavor::welch);
  EXPECT_NEAR(w.statistic, 0.5940885, 1e-6);
  EXPECT_NEAR(w.degrees_of_freedom, 4.9613734, 1e-6);
  EXPECT_NEAR(w.p_value, 0.5785032, 1e-4);
  const auto s = stats::two_sample_ttest(a, b, stats::TTestFlavor::student);
  EXPECT_NEAR(s.statistic, 0.4651303, 1e-6);
  EXPECT_NEAR(s.p_value, 0.6582404, 1e-4);
}

TEST(FoldedNormal, CentredUnitScale) {
  const auto s = stats::folded_normal_stats({0.0, 1.0});
  EXPECT_NEAR(s.mean, std::sqrt(2.0 / std::numbers::pi), 1e-12);
  EXPECT_NEAR(s.mean, 0.797885, 1e-6);
  EXPECT_NEAR(s.variance, 1.0 - 2.0 / std::numbers::pi, 1e-12);
  EXPECT_NEAR(s.variance, 0.363380, 1e-6);
}

TEST(FoldedNormal, DerivativeVanishesAtZeroShift) {
  for (double sigma : {0.01, 0.5, 3.0}) EXPECT_DOUBLE_EQ(stats::folded_normal_stats({0.0, sigma}).mean_derivative, 0.0);
}

TEST(FoldedNormal, DerivativeMatchesFiniteDifference) {
  for (double dn : {-0.7, -0.1, 0.05, 0.3, 2.0}) {
    const double h = 1e-6;
    const double fd = (stats::folded_normal_stats({dn + h, 0.4}).mean - stats::folded_normal_stats({dn - h, 0.4}).mean) / (2 * h);
    EXPECT_NEAR(stats::folded_normal_stats({dn, 0.4}).mean_derivative, fd, 1e-6);
  }
}

TEST(FoldedNormal, PdfIntegratesToOne) {
  for (double dn : {0.0, 0.3, -1.2})
    for (double sigma : {0.1, 1.0}) {
      const auto s = stats::folded_normal_stats({dn, sigma});
      const double hi = std::abs(dn) + 10 * sigma;
      const int n = 20000;  // composite Simpson
      double acc = s.pdf(0) + s.pdf(hi);
      for (int i = 1; i < n; ++i) acc += (i % 2 ? 4 : 2) * s.pdf(hi * i / n);
      EXPECT_NEAR(acc * hi / n / 3.0, 1.0, 1e-6);
    }
}

TEST(FoldedNormal, MeanIncreasesWithAbsoluteShift) {
  double prev = 0.0;
  for (int i = 0; i <= 40; ++i) {
    const double dn = 0.05 * i;
    const double m = stats::folded_normal_stats({dn, 0.3}).mean;
    const double m_neg = stats::folded_normal_stats({-dn, 0.3}).mean;
    EXPECT_NEAR(m, m_neg, 1e-12);
    EXPECT_GE(m, prev);
    prev = m;
  }
}

TEST(FoldedNormal, MonteCarloAgreement) {
  std::mt19937_64 rng(11);
  for (double dn : {0.0, 0.2}) {
    const double sigma = 0.25;
    std::normal_distribution<double> x(dn, sigma);
    const int n = 200000;
    double s1 = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double v = std::abs(x(rng));
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / n, var = s2 / n - mean * mean;
    const auto st = stats::folded_normal_stats({dn, sigma});
    EXPECT_NEAR(mean / st.mean, 1.0, 0.01);
    EXPECT_NEAR(var / st.variance, 1.0, 0.02);
  }
}

TEST(FoldedNormal, Errors) {
  EXPECT_THROW(stats::folded_normal_stats({0.0, 0.0}), cfair::Error);
  EXPECT_THROW(stats::folded_normal_stats({0.0, -1.0}), cfair::Error);
}

TEST(FoldedNormal, SigmaOneFromGroupSizes) {
  EXPECT_NEAR(stats::folded_sigma1(2.0, 4.0, 4.0), std::sqrt(4.0 / 4 + 4.0 / 4), 1e-12);
}
