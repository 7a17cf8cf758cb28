#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cfair/tabular.hpp"

namespace cfair::models {

enum class ModelKind { logistic, forest, adaboost, constant };

const char* to_string(ModelKind kind) noexcept;
ModelKind model_kind_from_string(std::string_view text);

struct TrainConfig {
  ModelKind kind = ModelKind::logistic;
  // logistic
  double learning_rate = 0.1;
  int iterations = 1000;
  double tolerance = 1e-8;
  double l2 = 0.0;
  // trees
  int n_estimators = 100;
  int max_depth = 10;
  int min_samples_leaf = 1;
  /// Features tried per split; 0 means sqrt(d) for forests and all for adaboost.
  int max_features = 0;
  /// Shrinkage applied to adaboost estimator weights.
  double boost_learning_rate = 1.0;
  /// Reweight classes by n_rows / (n_classes * n_c).
  bool balanced = false;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Multinomial logistic regression. Two-class models keep a single logit row
/// (sigmoid); K > 2 classes use K softmax rows.
struct LinearClassifier {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
  int n_classes = 2;
  std::vector<std::string> features;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> proba;  // leaves only
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  const std::vector<double>& leaf(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  int depth() const;
};

enum class EnsembleKind { forest, adaboost };

struct TreeEnsemble {
  EnsembleKind kind = EnsembleKind::forest;
  std::vector<DecisionTree> trees;
  /// Estimator weights (all 1 for forests).
  std::vector<double> tree_weights;
  int max_depth = 0;
  int n_estimators = 0;
  int n_classes = 2;
  std::vector<std::string> features;
};

using Classifier = std::variant<LinearClassifier, TreeEnsemble>;

/// Labels must be 0..K-1 with at least two distinct values present.
Classifier train_classifier(const Eigen::MatrixXd& x, std::span<const int> y, const TrainConfig& config,
                            std::vector<std::string> feature_names = {});

/// Rows sum to one. Throws DataError when the column count does not match
/// the training schema.
Eigen::MatrixXd predict_proba(const Classifier& model, const Eigen::MatrixXd& x);

/// Argmax of predict_proba, lowest class index on ties.
std::vector<int> predict(const Classifier& model, const Eigen::MatrixXd& x);
std::vector<int> argmax_rows(const Eigen::MatrixXd& proba);

int n_classes(const Classifier& model);
const std::vector<std::string>& feature_names(const Classifier& model);

/// Number of classes implied by labels (max + 1); throws on negative labels.
int count_classes(std::span<const int> y);
std::vector<double> balanced_class_weights(std::span<const int> y, int n_classes);

// Logistic objective, exposed for gradient checks.

struct LogisticObjective {
  double loss = 0.0;
  Eigen::MatrixXd grad_weights;
  Eigen::VectorXd grad_bias;
};

/// Weighted mean cross-entropy plus l2/2 * ||W||^2 and its gradient.
LogisticObjective logistic_objective(const LinearClassifier& model, const Eigen::MatrixXd& x,
                                     std::span<const int> y, std::span<const double> sample_weights,
                                     double l2);

// Trees.

struct TreeParams {
  int max_depth = 10;
  int min_samples_leaf = 1;
  int max_features = 0;  // 0: all features
};

/// Weighted CART with Gini impurity. Zero-weight rows are ignored.
DecisionTree fit_tree(const Eigen::MatrixXd& x, std::span<const int> y, std::span<const double> sample_weights,
                      int n_classes, const TreeParams& params, std::mt19937_64& rng);

// Class imbalance and scoring.

struct Resampled {
  Eigen::MatrixXd x;
  std::vector<int> y;
  /// Rows at and past this index are synthetic.
  std::size_t n_original = 0;
};

/// SMOTE: grows every class to the majority count by interpolating between a
/// class member and one of its k nearest same-class neighbours (Euclidean).
Resampled smote_oversample(const Eigen::MatrixXd& x, std::span<const int> y, int k_neighbors,
                           std::uint64_t seed);

/// Per-class F1 over classes 0..n_classes-1 (n_classes < 0: inferred). A zero
/// denominator yields F1 = 0.
std::vector<double> per_class_f1(std::span<const int> y_true, std::span<const int> y_pred, int n_classes = -1);
double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int n_classes = -1);

// Categorical expansion.

struct EncodedFeatures {
  Eigen::MatrixXd x;
  std::vector<std::string> names;
};

/// Numeric and binary columns pass through; categorical columns expand to
/// one indicator per level named "column=level".
EncodedFeatures encode_features(const Table& table, std::span<const std::string> columns);
EncodedFeatures encode_features(const Table& table, std::span<const std::string> columns,
                                std::span<const std::size_t> rows);

// Versioned JSON documents.

std::string to_json(const TrainConfig& config);
TrainConfig train_config_from_json(std::string_view text);
std::string to_json(const Classifier& model, const TrainConfig& config);
Classifier classifier_from_json(std::string_view text);

}  // namespace cfair::models
