#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cfair/metric.hpp"
#include "cfair/propensity.hpp"
#include "cfair/stats.hpp"
#include "cfair/tabular.hpp"

namespace cfair::matching {

/// g0 positions with at least one candidate and the union of all candidate
/// g1 positions, both ascending.
struct DeltaGroups {
  std::vector<std::size_t> c0;
  std::vector<std::size_t> c1;
  double delta = 0.0;
};

DeltaGroups delta_groups(const propensity::CandidateSet& candidates);

/// Positions refer to GroupSplit::g0 / g1 order.
struct CounterpartPair {
  std::size_t g0 = 0;
  std::size_t g1 = 0;
  double s = 0.0;
  double delta_s = 0.0;

  friend bool operator==(const CounterpartPair&, const CounterpartPair&) = default;
};

struct CounterpartPairs {
  std::vector<CounterpartPair> pairs;
  std::vector<std::size_t> unmatched_g0;

  std::size_t size() const noexcept { return pairs.size(); }
  double total_cost() const;
  /// (table row of g0 member, table row of g1 member) per pair.
  std::vector<std::pair<std::size_t, std::size_t>> table_rows(const GroupSplit& split) const;
};

enum class MatchOrder {
  dissimilarity,  // global ascending s, ties by g0 then g1 position
  probability,    // global descending matching probability, same tie rule
};

/// Admissible pairs ordered by `order`; a pair is accepted when both ends are
/// still free. g0 rows align with candidates.lists, g1 rows with Candidate::index.
CounterpartPairs greedy_match(const propensity::CandidateSet& candidates, const metric::MetricMatrix& w,
                              const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                              MatchOrder order = MatchOrder::dissimilarity, double epsilon0 = 1e-6);

/// Minimum total s among maximum-cardinality 1-1 matchings over admissible
/// pairs (Hungarian algorithm). Reference for greedy quality.
CounterpartPairs optimal_assignment(const propensity::CandidateSet& candidates, const metric::MetricMatrix& w,
                                    const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1);

/// Hungarian solver on a dense rows x cols cost table with rows <= cols.
/// Returns the assigned column per row.
std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost);

struct BalanceSide {
  double abs_diff = 0.0;  // |mean0 - mean1| / sqrt((var0 + var1) / 2)
  stats::TTestResult test;
};

struct BalanceRow {
  std::string feature;
  BalanceSide original;
  BalanceSide counterpart;
};

/// Per encoded feature: the full groups against the matched members only.
std::vector<BalanceRow> balance_report(const CounterpartPairs& pairs, const Table& table, const GroupSplit& split,
                                       std::span<const std::string> features,
                                       stats::TTestFlavor flavor = stats::TTestFlavor::welch);

BalanceSide compare_samples(std::span<const double> a, std::span<const double> b, stats::TTestFlavor flavor);

void write_pairs_csv(std::ostream& out, const CounterpartPairs& pairs, const GroupSplit& split);
void write_balance_csv(std::ostream& out, const std::vector<BalanceRow>& rows);

}  // namespace cfair::matching
