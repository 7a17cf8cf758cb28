#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "cfair/matching.hpp"
#include "cfair/metric.hpp"
#include "cfair/models.hpp"
#include "cfair/propensity.hpp"

using namespace cfair;

namespace {

struct Problem {
  Eigen::MatrixXd x0, x1;
  propensity::PropensityScores s0, s1;
  propensity::CandidateSet candidates;
};

Problem make_problem(int n0, int n1, int d, double percentile) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> z(0.0, 1.0);
  Problem p;
  p.x0.resize(n0, d);
  p.x1.resize(n1, d);
  for (Eigen::Index i = 0; i < p.x0.size(); ++i) p.x0.data()[i] = z(rng) + 0.5;
  for (Eigen::Index i = 0; i < p.x1.size(); ++i) p.x1.data()[i] = z(rng);
  for (int i = 0; i < n0; ++i) p.s0.score.push_back(p.x0(i, 0));
  for (int i = 0; i < n1; ++i) p.s1.score.push_back(p.x1(i, 0));
  p.candidates = propensity::build_candidates(p.s0, p.s1, propensity::delta_threshold(p.s0, p.s1, percentile));
  return p;
}

// Cost functions need every g0 row to have candidates.
Problem compact(const Problem& p) {
  Problem c = p;
  c.candidates.lists.clear();
  std::vector<Eigen::Index> keep;
  for (std::size_t n = 0; n < p.candidates.lists.size(); ++n)
    if (!p.candidates.lists[n].empty()) {
      keep.push_back(static_cast<Eigen::Index>(n));
      c.candidates.lists.push_back(p.candidates.lists[n]);
    }
  c.x0.resize(static_cast<Eigen::Index>(keep.size()), p.x0.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) c.x0.row(static_cast<Eigen::Index>(i)) = p.x0.row(keep[i]);
  return c;
}

void BM_DeltaThreshold(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto p = make_problem(n / 10, n, 1, 90.0);
  for (auto _ : state) benchmark::DoNotOptimize(propensity::delta_threshold(p.s0, p.s1, 90.0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.s0.size() * p.s1.size()));
}
BENCHMARK(BM_DeltaThreshold)->Arg(1000)->Arg(5000);

void BM_GreedyMatch(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto p = make_problem(n / 5, n, 4, 5.0);
  const auto w = metric::MetricMatrix::identity(4);
  for (auto _ : state) benchmark::DoNotOptimize(matching::greedy_match(p.candidates, w, p.x0, p.x1));
  state.counters["pairs"] = static_cast<double>(p.candidates.n_pairs());
}
BENCHMARK(BM_GreedyMatch)->Arg(1000)->Arg(5000);

void BM_CostAndGradient(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto p = compact(make_problem(n / 5, n, 6, 5.0));
  const auto w = metric::MetricMatrix::identity(6);
  for (auto _ : state) benchmark::DoNotOptimize(metric::cost_and_gradient(w, p.x0, p.x1, p.candidates));
}
BENCHMARK(BM_CostAndGradient)->Arg(1000)->Arg(5000);

void BM_ForestTraining(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(n, 8);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 8; ++j) x(i, j) = z(rng);
    y[static_cast<std::size_t>(i)] = x(i, 0) + 0.5 * x(i, 1) > 0.0;
  }
  models::TrainConfig cfg;
  cfg.kind = models::ModelKind::forest;
  cfg.n_estimators = 20;
  for (auto _ : state) benchmark::DoNotOptimize(models::train_classifier(x, y, cfg));
}
BENCHMARK(BM_ForestTraining)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
