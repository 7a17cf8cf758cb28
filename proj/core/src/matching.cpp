#include "cfair/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "cfair/csv.hpp"
#include "cfair/error.hpp"
#include "cfair/models.hpp"

namespace cfair::matching {

DeltaGroups delta_groups(const propensity::CandidateSet& candidates) {
  DeltaGroups out;
  out.delta = candidates.delta;
  std::vector<char> seen(candidates.n1, 0);
  for (std::size_t n = 0; n < candidates.lists.size(); ++n) {
    if (candidates.lists[n].empty()) continue;
    out.c0.push_back(n);
    for (const auto& c : candidates.lists[n]) {
      if (c.index >= seen.size()) seen.resize(c.index + 1, 0);
      seen[c.index] = 1;
    }
  }
  for (std::size_t m = 0; m < seen.size(); ++m)
    if (seen[m]) out.c1.push_back(m);
  return out;
}

double CounterpartPairs::total_cost() const {
  double total = 0.0;
  for (const auto& p : pairs) total += p.s;
  return total;
}

std::vector<std::pair<std::size_t, std::size_t>> CounterpartPairs::table_rows(const GroupSplit& split) const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.g0 >= split.g0.size() || p.g1 >= split.g1.size()) throw DataError("pair position outside the group split");
    out.emplace_back(split.g0[p.g0], split.g1[p.g1]);
  }
  return out;
}

namespace {

struct Scored {
  CounterpartPair pair;
  double key = 0.0;  // ascending
};

void check_dims(const propensity::CandidateSet& candidates, const metric::MetricMatrix& w, const Eigen::MatrixXd& g0,
                const Eigen::MatrixXd& g1) {
  if (g0.cols() != w.dim() || g1.cols() != w.dim()) throw DataError("feature dimension does not match the metric");
  if (static_cast<std::size_t>(g0.rows()) != candidates.lists.size())
    throw DataError("g0 rows do not align with candidate lists");
  for (const auto& list : candidates.lists)
    for (const auto& c : list)
      if (c.index >= static_cast<std::size_t>(g1.rows())) throw DataError("candidate index out of range");
}

std::vector<std::size_t> unmatched_rows(std::size_t n0, const std::vector<CounterpartPair>& pairs) {
  std::vector<char> used(n0, 0);
  for (const auto& p : pairs) used[p.g0] = 1;
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < n0; ++n)
    if (!used[n]) out.push_back(n);
  return out;
}

}  // namespace

CounterpartPairs greedy_match(const propensity::CandidateSet& candidates, const metric::MetricMatrix& w,
                              const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1, MatchOrder order,
                              double epsilon0) {
  check_dims(candidates, w, g0, g1);
  if (candidates.n_pairs() == 0) throw SystematicDifferenceError("no admissible counterpart pairs");

  std::vector<Scored> all;
  all.reserve(candidates.n_pairs());
  for (std::size_t n = 0; n < candidates.lists.size(); ++n) {
    const auto& list = candidates.lists[n];
    if (list.empty()) continue;
    Eigen::VectorXd s(static_cast<Eigen::Index>(list.size()));
    for (std::size_t k = 0; k < list.size(); ++k)
      s(static_cast<Eigen::Index>(k)) = metric::mahalanobis(w, g0.row(static_cast<Eigen::Index>(n)).transpose(),
                                                            g1.row(static_cast<Eigen::Index>(list[k].index)).transpose());
    Eigen::VectorXd alpha;
    if (order == MatchOrder::probability) {
      const double s_min = s.minCoeff();
      const Eigen::VectorXd e = (-(s.array() - s_min)).exp().matrix();
      alpha = e / (e.sum() + epsilon0 * std::exp(s_min));
    }
    for (std::size_t k = 0; k < list.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      Scored item{{n, list[k].index, s(i), list[k].delta_s}, order == MatchOrder::probability ? -alpha(i) : s(i)};
      all.push_back(item);
    }
  }
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
    if (a.key != b.key) return a.key < b.key;
    if (a.pair.g0 != b.pair.g0) return a.pair.g0 < b.pair.g0;
    return a.pair.g1 < b.pair.g1;
  });

  std::vector<char> used0(candidates.lists.size(), 0);
  std::vector<char> used1(static_cast<std::size_t>(g1.rows()), 0);
  CounterpartPairs out;
  for (const auto& item : all) {
    if (used0[item.pair.g0] || used1[item.pair.g1]) continue;
    used0[item.pair.g0] = used1[item.pair.g1] = 1;
    out.pairs.push_back(item.pair);
  }
  out.unmatched_g0 = unmatched_rows(candidates.lists.size(), out.pairs);
  return out;
}

std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost) {
  // Potentials formulation, 1-based with a virtual column 0.
  const auto n = static_cast<std::size_t>(cost.rows());
  const auto m = static_cast<std::size_t>(cost.cols());
  if (n > m) throw DataError("hungarian: more rows than columns");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) assignment[p[j] - 1] = j - 1;
  return assignment;
}

CounterpartPairs optimal_assignment(const propensity::CandidateSet& candidates, const metric::MetricMatrix& w,
                                    const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1) {
  check_dims(candidates, w, g0, g1);
  const auto n0 = static_cast<Eigen::Index>(candidates.lists.size());
  const auto n1 = g1.rows();
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(n0, n1, std::numeric_limits<double>::quiet_NaN());
  Eigen::MatrixXd dsd = Eigen::MatrixXd::Zero(n0, n1);
  double total = 0.0;
  for (Eigen::Index n = 0; n < n0; ++n)
    for (const auto& c : candidates.lists[static_cast<std::size_t>(n)]) {
      const auto m = static_cast<Eigen::Index>(c.index);
      s(n, m) = metric::mahalanobis(w, g0.row(n).transpose(), g1.row(m).transpose());
      dsd(n, m) = c.delta_s;
      total += std::abs(s(n, m));
    }
  // Forbidden cells cost more than any admissible matching, so the solver
  // first maximizes cardinality.
  const double big = 2.0 * total + 1.0;
  const bool transpose = n0 > n1;
  Eigen::MatrixXd cost = s.unaryExpr([big](double x) { return std::isnan(x) ? big : x; });
  if (transpose) cost.transposeInPlace();
  const auto assignment = hungarian(cost);

  CounterpartPairs out;
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    const auto n = static_cast<Eigen::Index>(transpose ? assignment[r] : r);
    const auto m = static_cast<Eigen::Index>(transpose ? r : assignment[r]);
    if (std::isnan(s(n, m))) continue;
    out.pairs.push_back({static_cast<std::size_t>(n), static_cast<std::size_t>(m), s(n, m), dsd(n, m)});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const CounterpartPair& a, const CounterpartPair& b) { return a.g0 < b.g0; });
  out.unmatched_g0 = unmatched_rows(candidates.lists.size(), out.pairs);
  return out;
}

BalanceSide compare_samples(std::span<const double> a, std::span<const double> b, stats::TTestFlavor flavor) {
  BalanceSide side;
  side.test = stats::two_sample_ttest(a, b, flavor);
  const double diff = std::abs(stats::mean(a) - stats::mean(b));
  const double pooled = std::sqrt(0.5 * (stats::variance(a) + stats::variance(b)));
  if (pooled > 0.0)
    side.abs_diff = diff / pooled;
  else
    side.abs_diff = diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return side;
}

std::vector<BalanceRow> balance_report(const CounterpartPairs& pairs, const Table& table, const GroupSplit& split,
                                       std::span<const std::string> features, stats::TTestFlavor flavor) {
  if (pairs.size() < 2) throw DataError("balance report needs at least two counterpart pairs");
  std::vector<std::size_t> m0, m1;
  for (const auto& [r0, r1] : pairs.table_rows(split)) {
    m0.push_back(r0);
    m1.push_back(r1);
  }
  const auto all0 = models::encode_features(table, features, split.g0);
  const auto all1 = models::encode_features(table, features, split.g1);
  const auto cp0 = models::encode_features(table, features, m0);
  const auto cp1 = models::encode_features(table, features, m1);

  auto col = [](const Eigen::MatrixXd& x, Eigen::Index j) {
    std::vector<double> v(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) v[static_cast<std::size_t>(i)] = x(i, j);
    return v;
  };
  std::vector<BalanceRow> rows;
  for (std::size_t j = 0; j < all0.names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    BalanceRow row;
    row.feature = all0.names[j];
    row.original = compare_samples(col(all0.x, jj), col(all1.x, jj), flavor);
    row.counterpart = compare_samples(col(cp0.x, jj), col(cp1.x, jj), flavor);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_pairs_csv(std::ostream& out, const CounterpartPairs& pairs, const GroupSplit& split) {
  csv::Writer w(out, "cfair.pairs/1", {"g0_index", "g1_index", "s", "delta_s"});
  const auto rows = pairs.table_rows(split);
  for (std::size_t i = 0; i < rows.size(); ++i)
    w.row({std::to_string(rows[i].first), std::to_string(rows[i].second), csv::format_number(pairs.pairs[i].s),
           csv::format_number(pairs.pairs[i].delta_s)});
}

void write_balance_csv(std::ostream& out, const std::vector<BalanceRow>& rows) {
  csv::Writer w(out, "cfair.balance/1",
                {"feature", "original_p", "counterpart_p", "original_abs_diff", "counterpart_abs_diff",
                 "original_degenerate", "counterpart_degenerate"});
  for (const auto& r : rows)
    w.row({r.feature, csv::format_number(r.original.test.p_value), csv::format_number(r.counterpart.test.p_value),
           csv::format_number(r.original.abs_diff), csv::format_number(r.counterpart.abs_diff),
           r.original.test.degenerate ? "1" : "0", r.counterpart.test.degenerate ? "1" : "0"});
}

}  // namespace cfair::matching
