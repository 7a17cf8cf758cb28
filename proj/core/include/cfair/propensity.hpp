#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cfair/models.hpp"
#include "cfair/tabular.hpp"

namespace cfair::propensity {

inline constexpr double kDefaultClamp = 1e-6;
inline constexpr std::size_t kDefaultPairBudget = 10'000'000;

/// Log-odds propensity scores, one per row of the scored matrix.
struct PropensityScores {
  std::vector<double> score;
  double clamp = kDefaultClamp;

  std::size_t size() const noexcept { return score.size(); }
};

/// log(p / (1 - p)) with p clamped to [clamp, 1 - clamp].
double log_odds(double p, double clamp = kDefaultClamp);

PropensityScores scores_from_probabilities(std::span<const double> p, double clamp = kDefaultClamp);

/// Scores from a classifier trained to predict the protected variable (class
/// 1 probability). Rejects models whose features include the protected column.
PropensityScores propensity_scores(const models::Classifier& model, const Eigen::MatrixXd& x,
                                   std::string_view protected_column, double clamp = kDefaultClamp);

/// Caliper from the percentile of |s0 - s1| over all cross-group pairs. Above
/// `pair_budget` pairs a seeded uniform sample of that many pairs is used.
double delta_threshold(const PropensityScores& scores0, const PropensityScores& scores1, double percentile = 90.0,
                       std::size_t pair_budget = kDefaultPairBudget, std::uint64_t seed = 0);

struct Candidate {
  std::size_t index = 0;  // position within g1
  double delta_s = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// For each g0 position, the g1 positions within the caliper, ordered by
/// |delta s| then index. Positions refer to GroupSplit::g0 / g1 order.
struct CandidateSet {
  std::vector<std::vector<Candidate>> lists;
  double delta = 0.0;
  std::size_t n1 = 0;

  std::vector<std::size_t> unmatched() const;
  std::size_t n_pairs() const;
};

/// Admits pairs with |s0 - s1| <= delta. Throws SystematicDifferenceError when
/// no g0 element has a candidate.
CandidateSet build_candidates(const PropensityScores& scores0, const PropensityScores& scores1, double delta);

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> g0;
  std::vector<std::size_t> g1;
};

Histogram histogram(const PropensityScores& scores0, const PropensityScores& scores1, int bins = 30);

/// row_index,group,score with table row indices taken from the split.
void write_scores_csv(std::ostream& out, const GroupSplit& split, const PropensityScores& scores0,
                      const PropensityScores& scores1);
void write_histogram_csv(std::ostream& out, const Histogram& h);

}  // namespace cfair::propensity
