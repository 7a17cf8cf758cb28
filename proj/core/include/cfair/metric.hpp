#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cfair/propensity.hpp"

namespace cfair::metric {

/// Symmetric d x d matrix of the quadratic dissimilarity s(x, y) = (x-y)' W (x-y).
struct MetricMatrix {
  Eigen::MatrixXd w;

  Eigen::Index dim() const noexcept { return w.rows(); }
  static MetricMatrix identity(Eigen::Index d) { return {Eigen::MatrixXd::Identity(d, d)}; }
  /// Throws DataError unless square, finite and symmetric to 1e-9.
  void validate() const;
};

struct LearnConfig {
  double learning_rate = 1e-4;
  int max_iterations = 100;
  double epsilon0 = 1e-6;
  /// Clip negative eigenvalues after every step so s stays a distance.
  bool psd_projection = true;
  std::uint64_t seed = 0;

  void validate() const;
};

double mahalanobis(const MetricMatrix& metric, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y);

/// alpha_m = exp(-s_m) / (sum_k exp(-s_k) + epsilon0) for each candidate row,
/// evaluated with the minimum s factored out.
Eigen::VectorXd matching_probabilities(const MetricMatrix& metric, const Eigen::Ref<const Eigen::VectorXd>& x,
                                       const Eigen::MatrixXd& candidates, double epsilon0 = 1e-6);

// Cost functions take g0 feature rows aligned with candidates.lists and g1
// feature rows indexed by Candidate::index. Every list must be non-empty.

/// Sum over g0 rows and their candidates of alpha * s.
double total_cost(const MetricMatrix& metric, const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                  const propensity::CandidateSet& candidates, double epsilon0 = 1e-6);

struct CostGradient {
  double cost = 0.0;
  /// d cost / d W_ij, treating all d*d entries as free.
  Eigen::MatrixXd gradient;
};

CostGradient cost_and_gradient(const MetricMatrix& metric, const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                               const propensity::CandidateSet& candidates, double epsilon0 = 1e-6);

/// Mean over g0 rows of the second moment of their candidate differences.
Eigen::MatrixXd weighted_covariance(const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                                    const propensity::CandidateSet& candidates);

/// Ridge-regularized inverse of weighted_covariance.
MetricMatrix initial_metric(const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                            const propensity::CandidateSet& candidates);

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& w);
Eigen::MatrixXd project_psd(const Eigen::MatrixXd& w);

struct LearnResult {
  MetricMatrix metric;  // lowest-cost iterate
  MetricMatrix initial;
  double initial_cost = 0.0;
  double best_cost = 0.0;
  int best_iteration = 0;
  std::vector<double> cost_history;  // index 0 is the initialization
};

LearnResult learn_metric(const Eigen::MatrixXd& g0, const Eigen::MatrixXd& g1,
                         const propensity::CandidateSet& candidates, const LearnConfig& config);

std::string to_json(const MetricMatrix& metric, const LearnConfig& config);
MetricMatrix metric_from_json(std::string_view text);

}  // namespace cfair::metric
