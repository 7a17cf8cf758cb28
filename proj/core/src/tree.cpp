#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cfair/error.hpp"
#include "cfair/models.hpp"

namespace cfair::models {

const std::vector<double>& DecisionTree::leaf(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    i = row(n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].proba;
}

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> level(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

namespace {

double gini(std::span<const double> counts, double total) {
  if (total <= 0.0) return 0.0;
  double sum_sq = 0.0;
  for (double c : counts) sum_sq += c * c;
  return 1.0 - sum_sq / (total * total);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // weighted child impurity
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const double> w, int n_classes,
              const TreeParams& params, std::mt19937_64& rng)
      : x_(x), y_(y), w_(w), k_(static_cast<std::size_t>(n_classes)), params_(params), rng_(rng) {
    features_.resize(static_cast<std::size_t>(x.cols()));
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& rows, int depth) {
    std::vector<double> counts(k_, 0.0);
    double total = 0.0;
    for (std::size_t r : rows) {
      counts[static_cast<std::size_t>(y_[r])] += w_[r];
      total += w_[r];
    }
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    const double impurity = gini(counts, total);
    const bool can_split = depth < params_.max_depth && impurity > 1e-12 &&
                           rows.size() >= 2 * static_cast<std::size_t>(params_.min_samples_leaf);
    Split best;
    if (can_split) best = find_split(rows);
    if (best.feature < 0) {
      for (double& c : counts) c /= total;
      tree_.nodes[static_cast<std::size_t>(id)].proba = std::move(counts);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (x_(static_cast<Eigen::Index>(r), best.feature) <= best.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int rgt = grow(right, depth + 1);
    TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = rgt;
    return id;
  }

  // Best split even when it does not lower impurity (XOR needs a neutral first cut).
  Split find_split(const std::vector<std::size_t>& rows) {
    std::size_t n_try = features_.size();
    if (params_.max_features > 0) n_try = std::min(n_try, static_cast<std::size_t>(params_.max_features));
    if (n_try < features_.size()) {
      // Partial Fisher-Yates: the first n_try entries become the sample.
      for (std::size_t i = 0; i < n_try; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, features_.size() - 1);
        std::swap(features_[i], features_[pick(rng_)]);
      }
    }
    Split best;
    best.score = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, std::size_t>> order(rows.size());
    std::vector<double> left(k_), right(k_);
    const std::size_t min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    for (std::size_t f = 0; f < n_try; ++f) {
      const int feature = features_[f];
      for (std::size_t i = 0; i < rows.size(); ++i)
        order[i] = {x_(static_cast<Eigen::Index>(rows[i]), feature), rows[i]};
      std::sort(order.begin(), order.end());
      if (order.front().first == order.back().first) continue;
      std::fill(left.begin(), left.end(), 0.0);
      std::fill(right.begin(), right.end(), 0.0);
      double wl = 0.0, wr = 0.0;
      for (const auto& [v, r] : order) {
        right[static_cast<std::size_t>(y_[r])] += w_[r];
        wr += w_[r];
      }
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t r = order[i].second;
        const std::size_t c = static_cast<std::size_t>(y_[r]);
        left[c] += w_[r];
        right[c] -= w_[r];
        wl += w_[r];
        wr -= w_[r];
        if (order[i].first == order[i + 1].first) continue;
        if (i + 1 < min_leaf || order.size() - i - 1 < min_leaf) continue;
        if (wl <= 0.0 || wr <= 0.0) continue;
        const double score = gini(left, wl) * wl + gini(right, wr) * wr;
        if (score < best.score) {
          best.score = score;
          best.feature = feature;
          best.threshold = 0.5 * (order[i].first + order[i + 1].first);
          // Guard against midpoint rounding onto the upper value.
          if (best.threshold >= order[i + 1].first) best.threshold = order[i].first;
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  std::span<const int> y_;
  std::span<const double> w_;
  std::size_t k_;
  TreeParams params_;
  std::mt19937_64& rng_;
  std::vector<int> features_;
  DecisionTree tree_;
};

}  // namespace

DecisionTree fit_tree(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const double> sample_weights,
                      int n_classes, const TreeParams& params, std::mt19937_64& rng) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.size() != sample_weights.size())
    throw DataError("fit_tree: inconsistent input sizes");
  if (params.max_depth < 0 || params.min_samples_leaf < 1) throw ConfigError("fit_tree: invalid tree parameters");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0 || y[i] >= n_classes) throw DataError("fit_tree: label out of range");
    if (sample_weights[i] > 0.0) rows.push_back(i);
  }
  if (rows.empty()) throw DataError("fit_tree: no rows with positive weight");
  TreeBuilder builder(x, y, sample_weights, n_classes, params, rng);
  return builder.build(std::move(rows));
}

}  // namespace cfair::models
