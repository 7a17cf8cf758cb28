#include "cfair/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>

#include "cfair/csv.hpp"
#include "cfair/error.hpp"
#include "cfair/stats.hpp"

namespace cfair::propensity {

double log_odds(double p, double clamp) {
  if (!(clamp > 0.0 && clamp < 0.5)) throw ConfigError("propensity clamp must lie in (0, 0.5)");
  if (std::isnan(p)) throw NumericalError("propensity probability is NaN");
  p = std::clamp(p, clamp, 1.0 - clamp);
  return std::log(p / (1.0 - p));
}

PropensityScores scores_from_probabilities(std::span<const double> p, double clamp) {
  PropensityScores s;
  s.clamp = clamp;
  s.score.reserve(p.size());
  for (double v : p) s.score.push_back(log_odds(v, clamp));
  return s;
}

PropensityScores propensity_scores(const models::Classifier& model, const Eigen::MatrixXd& x,
                                   std::string_view protected_column, double clamp) {
  for (const auto& name : models::feature_names(model)) {
    const bool leaked = name == protected_column ||
                        (name.size() > protected_column.size() && name.starts_with(protected_column) &&
                         name[protected_column.size()] == '=');
    if (leaked)
      throw DataError("propensity model uses the protected column '" + std::string(protected_column) + "' as a feature");
  }
  if (models::n_classes(model) != 2) throw DataError("propensity model must be a two-class model");
  const Eigen::MatrixXd proba = models::predict_proba(model, x);
  std::vector<double> p(static_cast<std::size_t>(proba.rows()));
  for (Eigen::Index i = 0; i < proba.rows(); ++i) p[static_cast<std::size_t>(i)] = proba(i, 1);
  return scores_from_probabilities(p, clamp);
}

double delta_threshold(const PropensityScores& scores0, const PropensityScores& scores1, double percentile,
                       std::size_t pair_budget, std::uint64_t seed) {
  if (scores0.score.empty() || scores1.score.empty()) throw DataError("delta_threshold: empty score set");
  if (pair_budget == 0) throw ConfigError("delta_threshold: pair budget must be positive");
  const auto& a = scores0.score;
  const auto& b = scores1.score;
  const double total = static_cast<double>(a.size()) * static_cast<double>(b.size());
  std::vector<double> gaps;
  if (total <= static_cast<double>(pair_budget)) {
    gaps.reserve(a.size() * b.size());
    for (double s0 : a)
      for (double s1 : b) gaps.push_back(std::fabs(s0 - s1));
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick0(0, a.size() - 1);
    std::uniform_int_distribution<std::size_t> pick1(0, b.size() - 1);
    gaps.reserve(pair_budget);
    for (std::size_t i = 0; i < pair_budget; ++i) gaps.push_back(std::fabs(a[pick0(rng)] - b[pick1(rng)]));
  }
  return stats::percentile_inplace(gaps, percentile);
}

std::vector<std::size_t> CandidateSet::unmatched() const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < lists.size(); ++n)
    if (lists[n].empty()) out.push_back(n);
  return out;
}

std::size_t CandidateSet::n_pairs() const {
  std::size_t total = 0;
  for (const auto& l : lists) total += l.size();
  return total;
}

CandidateSet build_candidates(const PropensityScores& scores0, const PropensityScores& scores1, double delta) {
  if (!(delta >= 0.0)) throw ConfigError("caliper delta must be non-negative");
  CandidateSet set;
  set.delta = delta;
  set.n1 = scores1.size();
  set.lists.resize(scores0.size());

  std::vector<std::pair<double, std::size_t>> sorted1;
  sorted1.reserve(scores1.size());
  for (std::size_t m = 0; m < scores1.size(); ++m) sorted1.emplace_back(scores1.score[m], m);
  std::sort(sorted1.begin(), sorted1.end());

  bool any = false;
  for (std::size_t n = 0; n < scores0.size(); ++n) {
    const double s0 = scores0.score[n];
    auto lo = std::lower_bound(sorted1.begin(), sorted1.end(), std::make_pair(s0 - delta, std::size_t{0}));
    auto& list = set.lists[n];
    for (auto it = lo; it != sorted1.end() && it->first <= s0 + delta; ++it) {
      const double gap = std::fabs(s0 - it->first);
      if (gap <= delta) list.push_back({it->second, gap});
    }
    std::sort(list.begin(), list.end(), [](const Candidate& x, const Candidate& y) {
      return x.delta_s != y.delta_s ? x.delta_s < y.delta_s : x.index < y.index;
    });
    any = any || !list.empty();
  }
  if (!any)
    throw SystematicDifferenceError(
        "no minority-group row has a propensity counterpart within delta; the groups do not overlap");
  return set;
}

Histogram histogram(const PropensityScores& scores0, const PropensityScores& scores1, int bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  if (scores0.score.empty() && scores1.score.empty()) throw DataError("histogram of empty scores");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* s : {&scores0.score, &scores1.score})
    for (double v : *s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (hi == lo) hi = lo + 1.0;
  Histogram h;
  const auto nb = static_cast<std::size_t>(bins);
  for (std::size_t i = 0; i <= nb; ++i) h.edges.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(nb));
  h.g0.assign(nb, 0);
  h.g1.assign(nb, 0);
  auto bin_of = [&](double v) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(nb));
    return std::min(b, nb - 1);
  };
  for (double v : scores0.score) ++h.g0[bin_of(v)];
  for (double v : scores1.score) ++h.g1[bin_of(v)];
  return h;
}

void write_scores_csv(std::ostream& out, const GroupSplit& split, const PropensityScores& scores0,
                      const PropensityScores& scores1) {
  if (scores0.size() != split.g0.size() || scores1.size() != split.g1.size())
    throw DataError("score counts do not match the group split");
  std::vector<std::tuple<std::size_t, int, double>> rows;
  for (std::size_t i = 0; i < split.g0.size(); ++i) rows.emplace_back(split.g0[i], 0, scores0.score[i]);
  for (std::size_t i = 0; i < split.g1.size(); ++i) rows.emplace_back(split.g1[i], 1, scores1.score[i]);
  std::sort(rows.begin(), rows.end());
  csv::Writer w(out, "cfair.propensity_scores/1", {"row_index", "group", "score"});
  for (const auto& [r, g, s] : rows) w.row({std::to_string(r), std::to_string(g), csv::format_number(s)});
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  csv::Writer w(out, "cfair.propensity_histogram/1", {"bin_lo", "bin_hi", "count_g0", "count_g1"});
  for (std::size_t i = 0; i < h.g0.size(); ++i)
    w.row({csv::format_number(h.edges[i]), csv::format_number(h.edges[i + 1]), std::to_string(h.g0[i]),
           std::to_string(h.g1[i])});
}

}  // namespace cfair::propensity
