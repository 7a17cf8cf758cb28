#include "cfair/metric.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "cfair/error.hpp"

namespace cfair::metric {

void MetricMatrix::validate() const {
  if (w.rows() != w.cols() || w.rows() == 0) throw DataError("metric matrix must be square and non-empty");
  if (!w.allFinite()) throw DataError("metric matrix has non-finite entries");
  if ((w - w.transpose()).cwiseAbs().maxCoeff() >= 1e-9) throw DataError("metric matrix is not symmetric");
}

void LearnConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("metric learning_rate must be positive");
  if (!(epsilon0 > 0.0)) throw ConfigError("metric epsilon0 must be positive");
  if (max_iterations < 0) throw ConfigError("metric max_iterations must be non-negative");
}

double mahalanobis(const MetricMatrix& metric, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != metric.dim() || y.size() != metric.dim())
    throw DataError("mahalanobis: vector dimension does not match the metric");
  const Eigen::VectorXd d = x - y;
  return d.dot(metric.w * d);
}

namespace {

// alpha for a vector of dissimilarities, exp(-s_min) factored out of both terms.
Eigen::VectorXd alphas(const Eigen::VectorXd& s, double epsilon0) {
  const double s_min = s.minCoeff();
  const Eigen::VectorXd e = (-(s.array() - s_min)).exp().matrix();
  return e / (e.sum() + epsilon0 * std::exp(s_min));
}

void check_problem(const MetricMatrix& metric, const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                   const propensity::CandidateSet& candidates) {
  if (g0.cols() != metric.dim() || g1.cols() != metric.dim())
    throw DataError("feature dimension does not match the metric");
  if (static_cast<std::size_t>(g0.rows()) != candidates.lists.size())
    throw DataError("g0 rows do not align with candidate lists");
  for (const auto& list : candidates.lists) {
    if (list.empty()) throw DataError("a g0 element has an empty candidate set");
    for (const auto& c : list)
      if (c.index >= static_cast<std::size_t>(g1.rows())) throw DataError("candidate index out of range");
  }
}

}  // namespace

Eigen::VectorXd matching_probabilities(const MetricMatrix& metric, const Eigen::Ref<const Eigen::VectorXd>& x,
                                       const Eigen::MatrixXd& candidates, double epsilon0) {
  if (candidates.rows() == 0) throw DataError("matching_probabilities: empty candidate list");
  Eigen::VectorXd s(candidates.rows());
  for (Eigen::Index m = 0; m < candidates.rows(); ++m) s(m) = mahalanobis(metric, x, candidates.row(m).transpose());
  return alphas(s, epsilon0);
}

CostGradient cost_and_gradient(const MetricMatrix& metric, const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                               const propensity::CandidateSet& candidates, double epsilon0) {
  check_problem(metric, g0, g1, candidates);
  const Eigen::Index d = metric.dim();
  CostGradient out;
  out.gradient = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd diffs;
  for (std::size_t n = 0; n < candidates.lists.size(); ++n) {
    const auto& list = candidates.lists[n];
    const auto k = static_cast<Eigen::Index>(list.size());
    diffs.resize(k, d);
    for (Eigen::Index m = 0; m < k; ++m)
      diffs.row(m) = g0.row(static_cast<Eigen::Index>(n)) - g1.row(static_cast<Eigen::Index>(list[static_cast<std::size_t>(m)].index));
    const Eigen::VectorXd s = (diffs * metric.w).cwiseProduct(diffs).rowwise().sum();
    const Eigen::VectorXd a = alphas(s, epsilon0);
    const double cost_n = a.dot(s);
    out.cost += cost_n;
    // d cost_n / d s_j = alpha_j (1 - s_j + cost_n); d s_j / d W = delta_j delta_j'.
    const Eigen::VectorXd g = a.array() * (1.0 - s.array() + cost_n);
    out.gradient.noalias() += diffs.transpose() * g.asDiagonal() * diffs;
  }
  return out;
}

double total_cost(const MetricMatrix& metric, const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                  const propensity::CandidateSet& candidates, double epsilon0) {
  check_problem(metric, g0, g1, candidates);
  double cost = 0.0;
  for (std::size_t n = 0; n < candidates.lists.size(); ++n) {
    const auto& list = candidates.lists[n];
    Eigen::VectorXd s(static_cast<Eigen::Index>(list.size()));
    for (std::size_t m = 0; m < list.size(); ++m)
      s(static_cast<Eigen::Index>(m)) = mahalanobis(metric, g0.row(static_cast<Eigen::Index>(n)).transpose(),
                                                    g1.row(static_cast<Eigen::Index>(list[m].index)).transpose());
    cost += alphas(s, epsilon0).dot(s);
  }
  return cost;
}

Eigen::MatrixXd weighted_covariance(const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                                    const propensity::CandidateSet& candidates) {
  check_problem(MetricMatrix::identity(g0.cols()), g0, g1, candidates);
  const Eigen::Index d = g0.cols();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t n = 0; n < candidates.lists.size(); ++n) {
    const auto& list = candidates.lists[n];
    Eigen::MatrixXd local = Eigen::MatrixXd::Zero(d, d);
    for (const auto& c : list) {
      const Eigen::VectorXd delta =
          (g0.row(static_cast<Eigen::Index>(n)) - g1.row(static_cast<Eigen::Index>(c.index))).transpose();
      local.noalias() += delta * delta.transpose();
    }
    cov += local / static_cast<double>(list.size());
  }
  return cov / static_cast<double>(candidates.lists.size());
}

MetricMatrix initial_metric(const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                            const propensity::CandidateSet& candidates) {
  const Eigen::MatrixXd cov = weighted_covariance(g0, g1, candidates);
  const Eigen::Index d = cov.rows();
  const double trace = cov.trace();
  // Every candidate coincides with its g0 element: any W gives zero cost.
  if (!(trace > 0.0)) return MetricMatrix::identity(d);
  const double ridge = 1e-6 * trace / static_cast<double>(d);
  const Eigen::MatrixXd reg = cov + ridge * Eigen::MatrixXd::Identity(d, d);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
  if (ldlt.info() != Eigen::Success) throw NumericalError("weighted covariance is not invertible");
  MetricMatrix m{symmetrize(ldlt.solve(Eigen::MatrixXd::Identity(d, d)))};
  if (!m.w.allFinite()) throw NumericalError("weighted covariance inverse is not finite");
  return m;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& w) { return 0.5 * (w + w.transpose()); }

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(w));
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed during PSD projection");
  const Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  return symmetrize(eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose());
}

LearnResult learn_metric(const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                         const propensity::CandidateSet& candidates, const LearnConfig& config) {
  config.validate();
  LearnResult result;
  result.initial = initial_metric(g0, g1, candidates);
  if (config.psd_projection) result.initial.w = project_psd(result.initial.w);
  result.initial_cost = total_cost(result.initial, g0, g1, candidates, config.epsilon0);
  if (!std::isfinite(result.initial_cost)) throw NumericalError("metric learning: initial cost is not finite");
  result.metric = result.initial;
  result.best_cost = result.initial_cost;
  result.cost_history.push_back(result.initial_cost);

  MetricMatrix current = result.initial;
  for (int it = 1; it <= config.max_iterations; ++it) {
    const CostGradient cg = cost_and_gradient(current, g0, g1, candidates, config.epsilon0);
    current.w = symmetrize(current.w - config.learning_rate * cg.gradient);
    if (config.psd_projection) current.w = project_psd(current.w);
    const double cost = total_cost(current, g0, g1, candidates, config.epsilon0);
    if (!std::isfinite(cost) || !current.w.allFinite())
      throw NumericalError("metric learning diverged at iteration " + std::to_string(it));
    result.cost_history.push_back(cost);
    if (cost < result.best_cost) {
      result.best_cost = cost;
      result.best_iteration = it;
      result.metric = current;
    }
  }
  return result;
}

std::string to_json(const MetricMatrix& metric, const LearnConfig& config) {
  std::vector<double> entries;
  for (Eigen::Index i = 0; i < metric.w.rows(); ++i)
    for (Eigen::Index j = 0; j < metric.w.cols(); ++j) entries.push_back(metric.w(i, j));
  nlohmann::json doc = {{"format", "cfair.metric"},
                        {"version", 1},
                        {"d", metric.dim()},
                        {"entries", entries},
                        {"config",
                         {{"learning_rate", config.learning_rate},
                          {"max_iterations", config.max_iterations},
                          {"epsilon0", config.epsilon0},
                          {"psd_projection", config.psd_projection},
                          {"seed", config.seed}}}};
  return doc.dump();
}

MetricMatrix metric_from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    if (doc.value("format", "") != "cfair.metric") throw DataError("not a cfair.metric document");
    if (doc.at("version").get<int>() != 1) throw DataError("unsupported cfair.metric version");
    const auto d = doc.at("d").get<Eigen::Index>();
    const auto entries = doc.at("entries").get<std::vector<double>>();
    if (d <= 0 || static_cast<Eigen::Index>(entries.size()) != d * d) throw DataError("metric json: bad entry count");
    MetricMatrix m{Eigen::MatrixXd(d, d)};
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) m.w(i, j) = entries[static_cast<std::size_t>(i * d + j)];
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("metric json: ") + e.what());
  }
}

}  // namespace cfair::metric
