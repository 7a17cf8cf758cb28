#include "cfair/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cfair/error.hpp"
#include "cfair/seed.hpp"

namespace cfair::models {

const char* to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::logistic: return "logistic";
    case ModelKind::forest: return "forest";
    case ModelKind::adaboost: return "adaboost";
    case ModelKind::constant: return "constant";
  }
  return "logistic";
}

ModelKind model_kind_from_string(std::string_view text) {
  if (text == "logistic") return ModelKind::logistic;
  if (text == "forest" || text == "random_forest") return ModelKind::forest;
  if (text == "adaboost") return ModelKind::adaboost;
  if (text == "constant") return ModelKind::constant;
  throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(boost_learning_rate > 0.0)) throw ConfigError("boost_learning_rate must be positive");
  if (iterations < 0) throw ConfigError("iterations must be non-negative");
  if (n_estimators < 1) throw ConfigError("n_estimators must be positive");
  if (max_depth < 1) throw ConfigError("max_depth must be positive");
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be positive");
  if (max_features < 0) throw ConfigError("max_features must be non-negative");
  if (l2 < 0.0 || tolerance < 0.0) throw ConfigError("l2 and tolerance must be non-negative");
}

int count_classes(std::span<const int> y) {
  int k = 0;
  for (int v : y) {
    if (v < 0) throw DataError("class labels must be non-negative");
    k = std::max(k, v + 1);
  }
  return k;
}

std::vector<double> balanced_class_weights(std::span<const int> y, int n_classes) {
  std::vector<double> counts(static_cast<std::size_t>(n_classes), 0.0);
  for (int v : y) counts[static_cast<std::size_t>(v)] += 1.0;
  std::vector<double> weights(counts.size(), 0.0);
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] > 0) weights[c] = static_cast<double>(y.size()) / (static_cast<double>(n_classes) * counts[c]);
  return weights;
}

namespace {

void check_training_input(const Eigen::MatrixXd& x, std::span<const int> y) {
  if (x.rows() == 0) throw DataError("training set is empty");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("feature rows and labels differ in length");
  if (!x.allFinite()) throw DataError("non-finite feature values");
  const int k = count_classes(y);
  std::vector<char> seen(static_cast<std::size_t>(k), 0);
  for (int v : y) seen[static_cast<std::size_t>(v)] = 1;
  if (std::count(seen.begin(), seen.end(), 1) < 2) throw DataError("training labels contain a single class");
}

std::vector<double> initial_weights(std::span<const int> y, int k, bool balanced) {
  std::vector<double> w(y.size(), 1.0);
  if (balanced) {
    const auto cw = balanced_class_weights(y, k);
    for (std::size_t i = 0; i < y.size(); ++i) w[i] = cw[static_cast<std::size_t>(y[i])];
  }
  return w;
}

Eigen::MatrixXd linear_proba(const LinearClassifier& m, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd logits = (x * m.weights.transpose()).rowwise() + m.bias.transpose();
  Eigen::MatrixXd p(x.rows(), m.n_classes);
  if (m.n_classes == 2) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double z = logits(i, 0);
      const double p1 = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      p(i, 0) = 1.0 - p1;
      p(i, 1) = p1;
    }
    return p;
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - top).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

LinearClassifier train_logistic(const Eigen::MatrixXd& x, std::span<const int> y, int k, const TrainConfig& cfg) {
  LinearClassifier m;
  m.n_classes = k;
  const Eigen::Index rows = k == 2 ? 1 : k;
  m.weights = Eigen::MatrixXd::Zero(rows, x.cols());
  m.bias = Eigen::VectorXd::Zero(rows);
  const auto w = initial_weights(y, k, cfg.balanced);
  double previous = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto obj = logistic_objective(m, x, y, w, cfg.l2);
    if (!std::isfinite(obj.loss))
      throw NumericalError("logistic regression diverged at iteration " + std::to_string(it));
    if (std::fabs(previous - obj.loss) < cfg.tolerance) break;
    previous = obj.loss;
    m.weights -= cfg.learning_rate * obj.grad_weights;
    m.bias -= cfg.learning_rate * obj.grad_bias;
  }
  return m;
}

LinearClassifier train_constant(std::span<const int> y, int k, std::size_t n_features, const TrainConfig& cfg) {
  LinearClassifier m;
  m.n_classes = k;
  const auto w = initial_weights(y, k, cfg.balanced);
  std::vector<double> mass(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) mass[static_cast<std::size_t>(y[i])] += w[i];
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  // Floor keeps logits finite for classes absent from training.
  auto logp = [&](std::size_t c) { return std::log(std::max(mass[c] / total, 1e-12)); };
  const auto fk = static_cast<Eigen::Index>(n_features);
  if (k == 2) {
    m.weights = Eigen::MatrixXd::Zero(1, fk);
    m.bias = Eigen::VectorXd::Constant(1, logp(1) - logp(0));
  } else {
    m.weights = Eigen::MatrixXd::Zero(k, fk);
    m.bias.resize(k);
    for (int c = 0; c < k; ++c) m.bias(c) = logp(static_cast<std::size_t>(c));
  }
  return m;
}

TreeEnsemble train_forest(const Eigen::MatrixXd& x, std::span<const int> y, int k, const TrainConfig& cfg) {
  TreeEnsemble e;
  e.kind = EnsembleKind::forest;
  e.n_classes = k;
  e.max_depth = cfg.max_depth;
  e.n_estimators = cfg.n_estimators;
  TreeParams params{cfg.max_depth, cfg.min_samples_leaf, cfg.max_features};
  if (params.max_features == 0)
    params.max_features = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(x.cols())))));
  const auto base = initial_weights(y, k, cfg.balanced);
  const std::size_t n = y.size();
  std::vector<double> w(n);
  for (int t = 0; t < cfg.n_estimators; ++t) {
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    std::vector<double> draws(n, 0.0);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) draws[pick(rng)] += 1.0;
    for (std::size_t i = 0; i < n; ++i) w[i] = draws[i] * base[i];
    e.trees.push_back(fit_tree(x, y, w, k, params, rng));
    e.tree_weights.push_back(1.0);
  }
  return e;
}

// Multiclass SAMME over weighted CART trees.
TreeEnsemble train_adaboost(const Eigen::MatrixXd& x, std::span<const int> y, int k, const TrainConfig& cfg) {
  TreeEnsemble e;
  e.kind = EnsembleKind::adaboost;
  e.n_classes = k;
  e.max_depth = cfg.max_depth;
  e.n_estimators = cfg.n_estimators;
  const TreeParams params{cfg.max_depth, cfg.min_samples_leaf, cfg.max_features};
  auto w = initial_weights(y, k, cfg.balanced);
  const std::size_t n = y.size();
  for (int t = 0; t < cfg.n_estimators; ++t) {
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= total;
    std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
    DecisionTree tree = fit_tree(x, y, w, k, params, rng);
    std::vector<char> miss(n, 0);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = tree.leaf(x.row(static_cast<Eigen::Index>(i)));
      const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
      if (pred != y[i]) {
        miss[i] = 1;
        err += w[i];
      }
    }
    if (err <= 0.0) {
      e.trees.push_back(std::move(tree));
      e.tree_weights.push_back(1.0);
      break;
    }
    if (err >= 1.0 - 1.0 / k) {
      if (e.trees.empty()) throw NumericalError("adaboost: first estimator is no better than chance");
      break;
    }
    const double alpha = cfg.boost_learning_rate * (std::log((1.0 - err) / err) + std::log(k - 1.0));
    for (std::size_t i = 0; i < n; ++i)
      if (miss[i]) w[i] *= std::exp(alpha);
    e.trees.push_back(std::move(tree));
    e.tree_weights.push_back(alpha);
  }
  return e;
}

Eigen::MatrixXd ensemble_proba(const TreeEnsemble& e, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(x.rows(), e.n_classes);
  const double total = std::accumulate(e.tree_weights.begin(), e.tree_weights.end(), 0.0);
  if (e.trees.empty() || !(total > 0.0)) throw DataError("ensemble has no weighted trees");
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (std::size_t t = 0; t < e.trees.size(); ++t) {
      const auto& leaf = e.trees[t].leaf(x.row(i));
      for (int c = 0; c < e.n_classes; ++c) p(i, c) += e.tree_weights[t] * leaf[static_cast<std::size_t>(c)];
    }
  }
  return p / total;
}

}  // namespace

LogisticObjective logistic_objective(const LinearClassifier& m, const Eigen::MatrixXd& x, std::span<const int> y,
                                     std::span<const double> sample_weights, double l2) {
  const Eigen::MatrixXd p = linear_proba(m, x);
  const Eigen::Index n = x.rows();
  double total = 0.0;
  for (double w : sample_weights) total += w;
  LogisticObjective out;
  // Residual matrix: p - onehot(y), weighted and normalized.
  Eigen::MatrixXd resid;
  double loss = 0.0;
  if (m.n_classes == 2) {
    resid.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double wi = sample_weights[static_cast<std::size_t>(i)] / total;
      const int yi = y[static_cast<std::size_t>(i)];
      loss -= wi * std::log(std::max(p(i, yi), 1e-300));
      resid(i, 0) = wi * (p(i, 1) - (yi == 1 ? 1.0 : 0.0));
    }
  } else {
    resid = p;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double wi = sample_weights[static_cast<std::size_t>(i)] / total;
      const int yi = y[static_cast<std::size_t>(i)];
      loss -= wi * std::log(std::max(p(i, yi), 1e-300));
      resid(i, yi) -= 1.0;
      resid.row(i) *= wi;
    }
  }
  out.loss = loss + 0.5 * l2 * m.weights.squaredNorm();
  out.grad_weights = resid.transpose() * x + l2 * m.weights;
  out.grad_bias = resid.colwise().sum().transpose();
  return out;
}

Classifier train_classifier(const Eigen::MatrixXd& x, std::span<const int> y, const TrainConfig& config,
                            std::vector<std::string> feature_names) {
  config.validate();
  check_training_input(x, y);
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != x.cols())
    throw DataError("feature name count does not match feature columns");
  if (feature_names.empty())
    for (Eigen::Index j = 0; j < x.cols(); ++j) feature_names.push_back("x" + std::to_string(j));
  const int k = count_classes(y);
  switch (config.kind) {
    case ModelKind::logistic: {
      auto m = train_logistic(x, y, k, config);
      m.features = std::move(feature_names);
      return m;
    }
    case ModelKind::constant: {
      auto m = train_constant(y, k, static_cast<std::size_t>(x.cols()), config);
      m.features = std::move(feature_names);
      return m;
    }
    case ModelKind::forest: {
      auto e = train_forest(x, y, k, config);
      e.features = std::move(feature_names);
      return e;
    }
    case ModelKind::adaboost: {
      auto e = train_adaboost(x, y, k, config);
      e.features = std::move(feature_names);
      return e;
    }
  }
  throw ConfigError("unsupported model kind");
}

int n_classes(const Classifier& model) {
  return std::visit([](const auto& m) { return m.n_classes; }, model);
}

const std::vector<std::string>& feature_names(const Classifier& model) {
  return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.features; }, model);
}

Eigen::MatrixXd predict_proba(const Classifier& model, const Eigen::MatrixXd& x) {
  const auto& names = feature_names(model);
  if (static_cast<std::size_t>(x.cols()) != names.size())
    throw DataError("schema mismatch: model expects " + std::to_string(names.size()) + " features, got " +
                    std::to_string(x.cols()));
  if (const auto* lin = std::get_if<LinearClassifier>(&model)) return linear_proba(*lin, x);
  return ensemble_proba(std::get<TreeEnsemble>(model), x);
}

std::vector<int> argmax_rows(const Eigen::MatrixXd& proba) {
  std::vector<int> out(static_cast<std::size_t>(proba.rows()));
  for (Eigen::Index i = 0; i < proba.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < proba.cols(); ++c)
      if (proba(i, c) > proba(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict(const Classifier& model, const Eigen::MatrixXd& x) {
  return argmax_rows(predict_proba(model, x));
}

Resampled smote_oversample(const Eigen::MatrixXd& x, std::span<const int> y, int k_neighbors, std::uint64_t seed) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("smote: feature rows and labels differ");
  if (k_neighbors < 1) throw ConfigError("smote: k_neighbors must be positive");
  const int k = count_classes(y);
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < y.size(); ++i) members[static_cast<std::size_t>(y[i])].push_back(static_cast<Eigen::Index>(i));
  std::size_t majority = 0;
  for (const auto& m : members) majority = std::max(majority, m.size());

  std::size_t extra = 0;
  for (const auto& m : members) {
    if (m.empty() || m.size() == majority) continue;
    if (m.size() < static_cast<std::size_t>(k_neighbors) + 1)
      throw DataError("smote: a minority class has fewer than k_neighbors + 1 samples");
    extra += majority - m.size();
  }
  Resampled out;
  out.n_original = y.size();
  out.x.resize(x.rows() + static_cast<Eigen::Index>(extra), x.cols());
  out.x.topRows(x.rows()) = x;
  out.y.assign(y.begin(), y.end());
  out.y.reserve(y.size() + extra);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::Index next = x.rows();
  for (int c = 0; c < k; ++c) {
    const auto& m = members[static_cast<std::size_t>(c)];
    if (m.empty() || m.size() == majority) continue;
    // k nearest same-class neighbours of every member, by brute force.
    std::vector<std::vector<Eigen::Index>> neighbours(m.size());
    std::vector<std::pair<double, std::size_t>> dist(m.size());
    for (std::size_t a = 0; a < m.size(); ++a) {
      for (std::size_t b = 0; b < m.size(); ++b)
        dist[b] = {b == a ? std::numeric_limits<double>::infinity() : (x.row(m[a]) - x.row(m[b])).squaredNorm(), b};
      std::partial_sort(dist.begin(), dist.begin() + k_neighbors, dist.end());
      for (int j = 0; j < k_neighbors; ++j) neighbours[a].push_back(m[dist[static_cast<std::size_t>(j)].second]);
    }
    std::uniform_int_distribution<std::size_t> pick_base(0, m.size() - 1);
    std::uniform_int_distribution<int> pick_nn(0, k_neighbors - 1);
    for (std::size_t s = m.size(); s < majority; ++s) {
      const std::size_t a = pick_base(rng);
      const Eigen::Index nn = neighbours[a][static_cast<std::size_t>(pick_nn(rng))];
      const double u = unit(rng);
      out.x.row(next++) = x.row(m[a]) + u * (x.row(nn) - x.row(m[a]));
      out.y.push_back(c);
    }
  }
  return out;
}

std::vector<double> per_class_f1(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
  if (y_true.size() != y_pred.size()) throw DataError("f1: label sequences differ in length");
  if (n_classes < 0) n_classes = std::max(count_classes(y_true), count_classes(y_pred));
  const auto k = static_cast<std::size_t>(n_classes);
  std::vector<double> tp(k, 0), fp(k, 0), fn(k, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const auto t = static_cast<std::size_t>(y_true[i]);
    const auto p = static_cast<std::size_t>(y_pred[i]);
    if (t >= k || p >= k) throw DataError("f1: label outside the declared class set");
    if (t == p) {
      tp[t] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  std::vector<double> f1(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    f1[c] = denom > 0 ? 2 * tp[c] / denom : 0.0;
  }
  return f1;
}

double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
  const auto f1 = per_class_f1(y_true, y_pred, n_classes);
  if (f1.empty()) return 0.0;
  return std::accumulate(f1.begin(), f1.end(), 0.0) / static_cast<double>(f1.size());
}

EncodedFeatures encode_features(const Table& table, std::span<const std::string> columns) {
  std::vector<std::size_t> all(table.n_rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return encode_features(table, columns, all);
}

EncodedFeatures encode_features(const Table& table, std::span<const std::string> columns,
                                std::span<const std::size_t> rows) {
  EncodedFeatures out;
  struct Source {
    std::size_t column;
    int level;  // -1: pass-through
  };
  std::vector<Source> sources;
  for (const auto& name : columns) {
    const std::size_t c = table.column_index(name);
    const Column& col = table.columns()[c];
    if (col.kind == ColumnKind::categorical) {
      for (std::size_t l = 0; l < col.levels.size(); ++l) {
        sources.push_back({c, static_cast<int>(l)});
        out.names.push_back(col.name + "=" + col.levels[l]);
      }
    } else {
      sources.push_back({c, -1});
      out.names.push_back(col.name);
    }
  }
  out.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(sources.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < sources.size(); ++j) {
      const double v = table.at(rows[i], sources[j].column);
      out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          sources[j].level < 0 ? v : (v == sources[j].level ? 1.0 : 0.0);
    }
  }
  return out;
}

}  // namespace cfair::models
