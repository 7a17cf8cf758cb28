#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "cfair/error.hpp"
#include "cfair/models.hpp"
#include "cfair/propensity.hpp"
#include "oracles.hpp"

using namespace cfair;
using namespace cfair::propensity;

namespace {

PropensityScores scores(std::vector<double> v) {
  PropensityScores s;
  s.score = std::move(v);
  return s;
}

std::vector<double> random_scores(std::size_t n, std::mt19937_64& rng, double mean) {
  std::normal_distribution<double> z(mean, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

}  // namespace

TEST(LogOdds, Examples) {
  EXPECT_DOUBLE_EQ(log_odds(0.5), 0.0);
  EXPECT_NEAR(log_odds(0.25), -std::log(3.0), 1e-12);
  EXPECT_NEAR(log_odds(0.75), std::log(3.0), 1e-12);
  EXPECT_NEAR(log_odds(1.0), 13.815509557963773, 1e-9);
  EXPECT_NEAR(log_odds(0.0), -13.815509557963773, 1e-9);
  EXPECT_THROW(log_odds(std::nan("")), NumericalError);
  EXPECT_THROW(log_odds(0.5, 0.0), ConfigError);
}

TEST(LogOdds, Monotone) {
  double prev = -1e300;
  for (int i = 0; i <= 1000; ++i) {
    const double s = log_odds(i / 1000.0);
    EXPECT_GE(s, prev);
    prev = s;
  }
}

TEST(DeltaThreshold, SingleVersusRange) {
  std::vector<double> b;
  for (int i = 1; i <= 10; ++i) b.push_back(i);
  EXPECT_NEAR(delta_threshold(scores({0.0}), scores(b), 90.0), 9.1, 1e-12);
  EXPECT_NEAR(delta_threshold(scores({0.0}), scores(b), 0.0), 1.0, 1e-12);
  EXPECT_NEAR(delta_threshold(scores({0.0}), scores(b), 100.0), 10.0, 1e-12);
}

TEST(DeltaThreshold, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const auto a = random_scores(13 + rep, rng, 0.0), b = random_scores(40, rng, 0.7);
    std::vector<double> gaps;
    for (double x : a)
      for (double y : b) gaps.push_back(std::fabs(x - y));
    for (double q : {10.0, 50.0, 90.0})
      EXPECT_NEAR(delta_threshold(scores(a), scores(b), q), cfair::testing::naive_percentile(gaps, q), 1e-12);
  }
}

TEST(DeltaThreshold, SampledPathIsSeededAndClose) {
  std::mt19937_64 rng(4);
  const auto a = scores(random_scores(300, rng, 0.0)), b = scores(random_scores(400, rng, 0.5));
  const double exact = delta_threshold(a, b, 90.0);
  const double s1 = delta_threshold(a, b, 90.0, 20000, 11);
  EXPECT_EQ(s1, delta_threshold(a, b, 90.0, 20000, 11));
  EXPECT_NEAR(s1, exact, 0.05 * exact);
  EXPECT_THROW(delta_threshold(scores({}), b), DataError);
  EXPECT_THROW(delta_threshold(a, b, 90.0, 0), ConfigError);
}

TEST(Candidates, InclusiveCaliper) {
  const auto set = build_candidates(scores({0.0}), scores({0.1, 0.5, 0.9}), 0.5);
  ASSERT_EQ(set.lists.size(), 1u);
  ASSERT_EQ(set.lists[0].size(), 2u);
  EXPECT_EQ(set.lists[0][0].index, 0u);
  EXPECT_EQ(set.lists[0][1].index, 1u);
  EXPECT_EQ(set.n_pairs(), 2u);
}

TEST(Candidates, ZeroCaliperDisjointGroups) {
  EXPECT_THROW(build_candidates(scores({0.0, 1.0}), scores({2.0, 3.0}), 0.0), SystematicDifferenceError);
  try {
    build_candidates(scores({0.0}), scores({2.0}), 0.0);
  } catch (const Error& e) {
    EXPECT_EQ(e.exit_code(), 4);
  }
  EXPECT_THROW(build_candidates(scores({0.0}), scores({0.0}), -1.0), ConfigError);
}

TEST(Candidates, UnmatchedRowsReported) {
  const auto set = build_candidates(scores({0.0, 10.0, 0.2}), scores({0.1}), 0.15);
  EXPECT_EQ(set.unmatched(), (std::vector<std::size_t>{1}));
}

TEST(Candidates, MatchExhaustiveScanAndGrowWithDelta) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = random_scores(15, rng, 0.0), b = random_scores(25, rng, 0.3);
    double prev_pairs = -1;
    for (double delta : {0.2, 0.5, 1.0, 3.0}) {
      CandidateSet got;
      try {
        got = build_candidates(scores(a), scores(b), delta);
      } catch (const SystematicDifferenceError&) {
        continue;
      }
      const auto want = cfair::testing::naive_candidates(a, b, delta);
      ASSERT_EQ(got.lists.size(), want.lists.size());
      for (std::size_t n = 0; n < got.lists.size(); ++n) {
        std::vector<std::size_t> gi, wi;
        for (const auto& c : got.lists[n]) gi.push_back(c.index);
        for (const auto& c : want.lists[n]) wi.push_back(c.index);
        std::sort(gi.begin(), gi.end());
        std::sort(wi.begin(), wi.end());
        EXPECT_EQ(gi, wi);
        for (std::size_t j = 1; j < got.lists[n].size(); ++j)
          EXPECT_LE(got.lists[n][j - 1].delta_s, got.lists[n][j].delta_s);
      }
      EXPECT_GE(static_cast<double>(got.n_pairs()), prev_pairs);
      prev_pairs = static_cast<double>(got.n_pairs());
    }
  }
}

TEST(PropensityScores, RejectsProtectedFeature) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 2, 3;
  const std::vector<int> y{0, 0, 1, 1};
  const auto leaked = models::train_classifier(x, y, models::TrainConfig{}, {"race"});
  EXPECT_THROW(propensity_scores(leaked, x, "race"), DataError);
  const auto onehot = models::train_classifier(x, y, models::TrainConfig{}, {"race=white"});
  EXPECT_THROW(propensity_scores(onehot, x, "race"), DataError);
  const auto ok = models::train_classifier(x, y, models::TrainConfig{}, {"racetrack"});
  const auto s = propensity_scores(ok, x, "race");
  EXPECT_EQ(s.size(), 4u);
  EXPECT_LT(s.score[0], s.score[3]);
}

TEST(Histogram, CountsEveryScore) {
  const auto h = histogram(scores({0.0, 0.5, 1.0}), scores({1.0, 2.0}), 4);
  ASSERT_EQ(h.edges.size(), 5u);
  EXPECT_DOUBLE_EQ(h.edges.front(), 0.0);
  EXPECT_DOUBLE_EQ(h.edges.back(), 2.0);
  EXPECT_EQ(h.g0, (std::vector<std::size_t>{1, 1, 1, 0}));
  EXPECT_EQ(h.g1, (std::vector<std::size_t>{0, 0, 1, 1}));
  std::ostringstream out;
  write_histogram_csv(out, h);
  EXPECT_EQ(out.str().rfind("# format=cfair.propensity_histogram", 0), 0u);
}
