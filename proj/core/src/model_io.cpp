#include <algorithm>

#include <json.hpp>

#include "cfair/error.hpp"
#include "cfair/models.hpp"

namespace cfair::models {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json config_json(const TrainConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"learning_rate", c.learning_rate},
          {"iterations", c.iterations},
          {"tolerance", c.tolerance},
          {"l2", c.l2},
          {"n_estimators", c.n_estimators},
          {"max_depth", c.max_depth},
          {"min_samples_leaf", c.min_samples_leaf},
          {"max_features", c.max_features},
          {"boost_learning_rate", c.boost_learning_rate},
          {"balanced", c.balanced},
          {"seed", c.seed}};
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

TrainConfig config_from(const json& j) {
  TrainConfig c;
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  static const char* known[] = {"kind", "learning_rate", "iterations", "tolerance", "l2", "n_estimators",
                                "max_depth", "min_samples_leaf", "max_features", "boost_learning_rate",
                                "balanced", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw ConfigError("unknown model config key '" + key + "'");
  }
  if (j.contains("kind")) c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  if (c.kind == ModelKind::adaboost) c.max_depth = 3;
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "iterations", c.iterations);
  read_opt(j, "tolerance", c.tolerance);
  read_opt(j, "l2", c.l2);
  read_opt(j, "n_estimators", c.n_estimators);
  read_opt(j, "max_depth", c.max_depth);
  read_opt(j, "min_samples_leaf", c.min_samples_leaf);
  read_opt(j, "max_features", c.max_features);
  read_opt(j, "boost_learning_rate", c.boost_learning_rate);
  read_opt(j, "balanced", c.balanced);
  read_opt(j, "seed", c.seed);
  c.validate();
  return c;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols) throw DataError("model json: ragged weight matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = j[i][static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json tree_json(const DecisionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    if (n.feature < 0)
      nodes.push_back({{"leaf", n.proba}});
    else
      nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
  }
  return nodes;
}

DecisionTree tree_from(const json& j, int n_classes, std::size_t n_features) {
  DecisionTree t;
  for (const auto& n : j) {
    TreeNode node;
    if (n.contains("leaf")) {
      node.proba = n.at("leaf").get<std::vector<double>>();
      if (static_cast<int>(node.proba.size()) != n_classes) throw DataError("model json: leaf width mismatch");
    } else {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
      if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= n_features)
        throw DataError("model json: split feature out of range");
    }
    t.nodes.push_back(std::move(node));
  }
  for (const auto& n : t.nodes) {
    if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || static_cast<std::size_t>(n.left) >= t.nodes.size() ||
                           static_cast<std::size_t>(n.right) >= t.nodes.size()))
      throw DataError("model json: child index out of range");
  }
  if (t.nodes.empty()) throw DataError("model json: empty tree");
  return t;
}

}  // namespace

std::string to_json(const TrainConfig& config) { return config_json(config).dump(); }

TrainConfig train_config_from_json(std::string_view text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

std::string to_json(const Classifier& model, const TrainConfig& config) {
  json doc = {{"format", "cfair.model"}, {"version", kFormatVersion}, {"config", config_json(config)}};
  if (const auto* lin = std::get_if<LinearClassifier>(&model)) {
    doc["kind"] = "linear";
    doc["n_classes"] = lin->n_classes;
    doc["features"] = lin->features;
    doc["weights"] = matrix_json(lin->weights);
    doc["bias"] = std::vector<double>(lin->bias.data(), lin->bias.data() + lin->bias.size());
  } else {
    const auto& e = std::get<TreeEnsemble>(model);
    doc["kind"] = e.kind == EnsembleKind::forest ? "forest" : "adaboost";
    doc["n_classes"] = e.n_classes;
    doc["features"] = e.features;
    doc["max_depth"] = e.max_depth;
    doc["n_estimators"] = e.n_estimators;
    doc["tree_weights"] = e.tree_weights;
    json trees = json::array();
    for (const auto& t : e.trees) trees.push_back(tree_json(t));
    doc["trees"] = trees;
  }
  return doc.dump();
}

Classifier classifier_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.value("format", "") != "cfair.model") throw DataError("not a cfair.model document");
    if (doc.at("version").get<int>() != kFormatVersion) throw DataError("unsupported cfair.model version");
    const std::string kind = doc.at("kind").get<std::string>();
    const int k = doc.at("n_classes").get<int>();
    auto features = doc.at("features").get<std::vector<std::string>>();
    if (kind == "linear") {
      LinearClassifier m;
      m.n_classes = k;
      m.features = std::move(features);
      m.weights = matrix_from(doc.at("weights"), static_cast<Eigen::Index>(m.features.size()));
      const auto bias = doc.at("bias").get<std::vector<double>>();
      m.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
      const Eigen::Index expected = k == 2 ? 1 : k;
      if (m.weights.rows() != expected || m.bias.size() != expected) throw DataError("model json: bad weight shape");
      if (!m.weights.allFinite() || !m.bias.allFinite()) throw DataError("model json: non-finite weights");
      return m;
    }
    TreeEnsemble e;
    if (kind == "forest")
      e.kind = EnsembleKind::forest;
    else if (kind == "adaboost")
      e.kind = EnsembleKind::adaboost;
    else
      throw DataError("model json: unknown kind '" + kind + "'");
    e.n_classes = k;
    e.features = std::move(features);
    e.max_depth = doc.at("max_depth").get<int>();
    e.n_estimators = doc.at("n_estimators").get<int>();
    e.tree_weights = doc.at("tree_weights").get<std::vector<double>>();
    for (const auto& t : doc.at("trees")) e.trees.push_back(tree_from(t, k, e.features.size()));
    if (e.trees.size() != e.tree_weights.size()) throw DataError("model json: tree/weight count mismatch");
    for (double w : e.tree_weights)
      if (!(w >= 0.0)) throw DataError("model json: negative estimator weight");
    return e;
  } catch (const json::exception& ex) {
    throw DataError(std::string("model json: ") + ex.what());
  }
}

}  // namespace cfair::models
