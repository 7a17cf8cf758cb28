#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfair/stats.hpp"
#include "cfair/tabular.hpp"

namespace cfair::fairness {

/// |mean(pred0) - mean(pred1)|.
double dp_gap(std::span<const double> pred0, std::span<const double> pred1);

struct CdpResult {
  double gap = 0.0;
  stats::TTestResult test;
  std::size_t n_pairs = 0;
};

/// pred0[i] and pred1[i] belong to the same counterpart pair.
CdpResult cdp_gap(std::span<const double> pred0, std::span<const double> pred1);

struct ClassRates {
  int cls = 0;
  double tpr0 = 0.0, tpr1 = 0.0;
  double ppv0 = 0.0, ppv1 = 0.0;
  double tpr_gap = 0.0;
  double ppv_gap = 0.0;
  /// False when a group has no positives (TPR) or no positive predictions (PPV).
  bool tpr_defined = true;
  bool ppv_defined = true;
};

struct RateGaps {
  std::vector<ClassRates> classes;
  /// Positive class for binary tasks, max over defined classes otherwise. NaN
  /// when nothing is defined.
  double equal_opportunity = 0.0;
  double sufficiency = 0.0;
};

/// One-vs-rest rates per class. group[i] is 0 or 1.
RateGaps group_rate_gaps(std::span<const int> y_true, std::span<const int> y_pred, std::span<const int> group,
                         int n_classes, int positive_class = 1);

/// Same, on table rows: membership from the split, optionally restricted.
RateGaps group_rate_gaps(std::span<const int> y_true, std::span<const int> y_pred, const GroupSplit& groups,
                         std::span<const std::size_t> restrict = {}, int n_classes = -1, int positive_class = 1);

struct SliceMetrics {
  std::string slice;
  std::size_t n0 = 0, n1 = 0;
  /// Per-class mean-probability gaps and their aggregate (see RateGaps).
  std::vector<double> dp_gap_by_class;
  double dp_gap = 0.0;
  bool has_cdp = false;
  CdpResult cdp;
  double accuracy0 = 0.0, accuracy1 = 0.0;
  RateGaps rates;
};

/// Evaluates one population slice. `rows` index into y_true / proba / group;
/// `pairs` (positions into the same arrays) enable the paired analysis.
SliceMetrics evaluate_slice(std::string name, std::span<const int> y_true, const Eigen::MatrixXd& proba,
                            std::span<const int> group, std::span<const std::size_t> rows,
                            std::span<const std::pair<std::size_t, std::size_t>> pairs = {},
                            int positive_class = 1);

/// Flat result line; `cls` is a class name or "all" for aggregates.
struct Record {
  int fold = 0;
  std::string slice;
  std::string metric;
  std::string cls;
  double value = 0.0;
  double p_value = 0.0;  // NaN unless the metric carries a test
};

struct SummaryRecord {
  std::string slice;
  std::string metric;
  std::string cls;
  double mean = 0.0;
  double stddev = 0.0;  // sample std over folds; NaN for a single fold
  std::size_t n_folds = 0;
};

struct FairnessReport {
  std::vector<Record> records;
  std::vector<SummaryRecord> summary;
  std::vector<std::string> class_names;
  std::uint64_t seed = 0;
  std::string model_id;
  std::string config_hash;

  const SummaryRecord* find(std::string_view slice, std::string_view metric, std::string_view cls = "all") const;
};

std::vector<Record> flatten(const SliceMetrics& m, int fold, std::span<const std::string> class_names);
std::vector<SummaryRecord> summarize(std::span<const Record> records);

/// Class probabilities for the test rows of one fold.
using FoldModelFn = std::function<Eigen::MatrixXd(int fold, const std::vector<std::size_t>& train_rows,
                                                  const std::vector<std::size_t>& test_rows)>;
/// Counterpart pairs (table rows) to use within one fold.
using FoldPairsFn = std::function<std::vector<std::pair<std::size_t, std::size_t>>(
    int fold, const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& test_rows)>;

struct AuditInput {
  std::vector<int> y;  // per table row
  GroupSplit split;
  std::size_t n_rows = 0;
  FoldPlan folds;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // table rows, used when pairs_fn is empty
  std::vector<std::string> class_names;                    // defaults to "0", "1", ...
  int positive_class = 1;
};

/// Slices counterparts / unmatched / total on every fold's test rows.
FairnessReport audit(const AuditInput& input, const FoldModelFn& model_fn, const FoldPairsFn& pairs_fn = {});

std::string to_json(const FairnessReport& report);
void write_report_csv(std::ostream& out, const FairnessReport& report);

}  // namespace cfair::fairness
