#include "cfair/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <tuple>

#include <json.hpp>

#include "cfair/csv.hpp"
#include "cfair/error.hpp"
#include "cfair/models.hpp"

namespace cfair::fairness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? kNaN : static_cast<double>(num) / static_cast<double>(den);
}

double aggregate(const std::vector<double>& per_class, int positive_class) {
  if (per_class.size() == 2) return per_class[static_cast<std::size_t>(positive_class)];
  double best = kNaN;
  for (double v : per_class)
    if (!std::isnan(v) && (std::isnan(best) || v > best)) best = v;
  return best;
}

}  // namespace

double dp_gap(std::span<const double> pred0, std::span<const double> pred1) {
  if (pred0.empty() || pred1.empty()) throw DataError("dp_gap: empty group");
  return std::abs(stats::mean(pred0) - stats::mean(pred1));
}

CdpResult cdp_gap(std::span<const double> pred0, std::span<const double> pred1) {
  if (pred0.size() != pred1.size()) throw DataError("cdp_gap: pair columns differ in length");
  if (pred0.size() < 2) throw DataError("cdp_gap: needs at least two pairs");
  CdpResult out;
  out.gap = dp_gap(pred0, pred1);
  out.test = stats::paired_ttest(pred0, pred1);
  out.n_pairs = pred0.size();
  return out;
}

RateGaps group_rate_gaps(std::span<const int> y_true, std::span<const int> y_pred, std::span<const int> group,
                         int n_classes, int positive_class) {
  if (y_true.size() != y_pred.size() || y_true.size() != group.size())
    throw DataError("group_rate_gaps: label arrays differ in length");
  if (n_classes < 2) throw DataError("group_rate_gaps: needs at least two classes");
  if (positive_class < 0 || positive_class >= n_classes) throw DataError("group_rate_gaps: bad positive class");

  RateGaps out;
  std::vector<double> tpr_gaps, ppv_gaps;
  for (int c = 0; c < n_classes; ++c) {
    std::size_t tp[2] = {0, 0}, fn[2] = {0, 0}, fp[2] = {0, 0};
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      const int g = group[i];
      if (g != 0 && g != 1) throw DataError("group_rate_gaps: group codes must be 0 or 1");
      const bool t = y_true[i] == c, p = y_pred[i] == c;
      if (t && p) ++tp[g];
      if (t && !p) ++fn[g];
      if (!t && p) ++fp[g];
    }
    ClassRates r;
    r.cls = c;
    r.tpr0 = ratio(tp[0], tp[0] + fn[0]);
    r.tpr1 = ratio(tp[1], tp[1] + fn[1]);
    r.ppv0 = ratio(tp[0], tp[0] + fp[0]);
    r.ppv1 = ratio(tp[1], tp[1] + fp[1]);
    r.tpr_defined = !std::isnan(r.tpr0) && !std::isnan(r.tpr1);
    r.ppv_defined = !std::isnan(r.ppv0) && !std::isnan(r.ppv1);
    r.tpr_gap = r.tpr_defined ? std::abs(r.tpr0 - r.tpr1) : kNaN;
    r.ppv_gap = r.ppv_defined ? std::abs(r.ppv0 - r.ppv1) : kNaN;
    tpr_gaps.push_back(r.tpr_gap);
    ppv_gaps.push_back(r.ppv_gap);
    out.classes.push_back(r);
  }
  out.equal_opportunity = aggregate(tpr_gaps, positive_class);
  out.sufficiency = aggregate(ppv_gaps, positive_class);
  return out;
}

RateGaps group_rate_gaps(std::span<const int> y_true, std::span<const int> y_pred, const GroupSplit& groups,
                         std::span<const std::size_t> restrict, int n_classes, int positive_class) {
  if (y_true.size() != y_pred.size()) throw DataError("group_rate_gaps: label arrays differ in length");
  const auto membership = groups.membership(y_true.size());
  std::vector<int> t, p, g;
  auto take = [&](std::size_t i) {
    if (i >= y_true.size()) throw DataError("group_rate_gaps: restriction index out of range");
    t.push_back(y_true[i]);
    p.push_back(y_pred[i]);
    g.push_back(membership[i]);
  };
  if (restrict.empty())
    for (std::size_t i = 0; i < y_true.size(); ++i) take(i);
  else
    for (std::size_t i : restrict) take(i);
  if (n_classes < 0) n_classes = std::max({2, models::count_classes(y_true), models::count_classes(y_pred)});
  return group_rate_gaps(t, p, g, n_classes, positive_class);
}

SliceMetrics evaluate_slice(std::string name, std::span<const int> y_true, const Eigen::MatrixXd& proba,
                            std::span<const int> group, std::span<const std::size_t> rows,
                            std::span<const std::pair<std::size_t, std::size_t>> pairs, int positive_class) {
  const auto k = static_cast<int>(proba.cols());
  if (static_cast<std::size_t>(proba.rows()) != y_true.size() || group.size() != y_true.size())
    throw DataError("evaluate_slice: arrays are not aligned");
  SliceMetrics m;
  m.slice = std::move(name);
  const auto pred = models::argmax_rows(proba);

  std::vector<int> t, p, g;
  std::size_t correct[2] = {0, 0};
  for (std::size_t i : rows) {
    if (i >= y_true.size()) throw DataError("evaluate_slice: row index out of range");
    t.push_back(y_true[i]);
    p.push_back(pred[i]);
    g.push_back(group[i]);
    (group[i] == 0 ? m.n0 : m.n1)++;
    if (pred[i] == y_true[i]) ++correct[group[i] == 0 ? 0 : 1];
  }
  m.accuracy0 = ratio(correct[0], m.n0);
  m.accuracy1 = ratio(correct[1], m.n1);

  for (int c = 0; c < k; ++c) {
    std::vector<double> p0, p1;
    for (std::size_t i : rows) (group[i] == 0 ? p0 : p1).push_back(proba(static_cast<Eigen::Index>(i), c));
    m.dp_gap_by_class.push_back(p0.empty() || p1.empty() ? kNaN : dp_gap(p0, p1));
  }
  m.dp_gap = aggregate(m.dp_gap_by_class, positive_class);

  if (pairs.size() >= 2) {
    const int c = k == 2 ? positive_class : -1;
    if (c >= 0) {
      std::vector<double> a, b;
      for (const auto& [i0, i1] : pairs) {
        a.push_back(proba(static_cast<Eigen::Index>(i0), c));
        b.push_back(proba(static_cast<Eigen::Index>(i1), c));
      }
      m.cdp = cdp_gap(a, b);
    } else {
      // Multiclass: the class with the largest counterpart gap carries the test.
      double best = -1.0;
      for (int cc = 0; cc < k; ++cc) {
        std::vector<double> a, b;
        for (const auto& [i0, i1] : pairs) {
          a.push_back(proba(static_cast<Eigen::Index>(i0), cc));
          b.push_back(proba(static_cast<Eigen::Index>(i1), cc));
        }
        auto r = cdp_gap(a, b);
        if (r.gap > best) {
          best = r.gap;
          m.cdp = r;
        }
      }
    }
    m.has_cdp = true;
  }

  if (!t.empty()) {
    const int n_classes = std::max({k, models::count_classes(t)});
    m.rates = group_rate_gaps(t, p, g, n_classes, positive_class);
  }
  return m;
}

const SummaryRecord* FairnessReport::find(std::string_view slice, std::string_view metric,
                                          std::string_view cls) const {
  for (const auto& s : summary)
    if (s.slice == slice && s.metric == metric && s.cls == cls) return &s;
  return nullptr;
}

std::vector<Record> flatten(const SliceMetrics& m, int fold, std::span<const std::string> class_names) {
  auto name = [&](std::size_t c) { return c < class_names.size() ? class_names[c] : std::to_string(c); };
  std::vector<Record> out;
  auto add = [&](std::string metric, std::string cls, double value, double p = kNaN) {
    out.push_back({fold, m.slice, std::move(metric), std::move(cls), value, p});
  };
  add("n_g0", "all", static_cast<double>(m.n0));
  add("n_g1", "all", static_cast<double>(m.n1));
  add("dp_gap", "all", m.dp_gap);
  if (m.dp_gap_by_class.size() > 2)
    for (std::size_t c = 0; c < m.dp_gap_by_class.size(); ++c) add("dp_gap", name(c), m.dp_gap_by_class[c]);
  if (m.has_cdp) {
    add("cdp_gap", "all", m.cdp.gap, m.cdp.test.p_value);
    add("paired_t", "all", m.cdp.test.statistic, m.cdp.test.p_value);
    add("n_pairs", "all", static_cast<double>(m.cdp.n_pairs));
  }
  add("accuracy_g0", "all", m.accuracy0);
  add("accuracy_g1", "all", m.accuracy1);
  add("equal_opportunity", "all", m.rates.equal_opportunity);
  add("sufficiency", "all", m.rates.sufficiency);
  for (const auto& r : m.rates.classes) {
    add("tpr_gap", name(static_cast<std::size_t>(r.cls)), r.tpr_gap);
    add("ppv_gap", name(static_cast<std::size_t>(r.cls)), r.ppv_gap);
  }
  return out;
}

std::vector<SummaryRecord> summarize(std::span<const Record> records) {
  std::vector<std::tuple<std::string, std::string, std::string>> order;
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> values;
  for (const auto& r : records) {
    auto key = std::make_tuple(r.slice, r.metric, r.cls);
    auto [it, inserted] = values.try_emplace(key);
    if (inserted) order.push_back(key);
    if (!std::isnan(r.value)) it->second.push_back(r.value);
  }
  std::vector<SummaryRecord> out;
  for (const auto& key : order) {
    const auto& v = values[key];
    SummaryRecord s{std::get<0>(key), std::get<1>(key), std::get<2>(key), kNaN, kNaN, v.size()};
    if (!v.empty()) s.mean = stats::mean(v);
    if (v.size() >= 2) s.stddev = stats::stddev(v);
    out.push_back(std::move(s));
  }
  return out;
}

FairnessReport audit(const AuditInput& input, const FoldModelFn& model_fn, const FoldPairsFn& pairs_fn) {
  if (!model_fn) throw ConfigError("audit: missing model function");
  if (input.y.size() != input.n_rows || input.folds.assignments.size() != input.n_rows)
    throw DataError("audit: labels, folds and row count disagree");
  const auto group = input.split.membership(input.n_rows);

  FairnessReport report;
  report.seed = input.folds.seed;
  report.class_names = input.class_names;
  for (int fold = 0; fold < input.folds.k; ++fold) {
    const auto train = input.folds.train_rows(fold);
    const auto test = input.folds.test_rows(fold);
    if (test.empty()) continue;
    const Eigen::MatrixXd proba_test = model_fn(fold, train, test);
    if (static_cast<std::size_t>(proba_test.rows()) != test.size())
      throw DataError("audit: model returned the wrong number of rows");
    if (report.class_names.empty())
      for (Eigen::Index c = 0; c < proba_test.cols(); ++c) report.class_names.push_back(std::to_string(c));

    // Re-index the fold's test rows to 0..|test|-1.
    std::vector<std::ptrdiff_t> local(input.n_rows, -1);
    std::vector<int> y_local, g_local;
    for (std::size_t i = 0; i < test.size(); ++i) {
      local[test[i]] = static_cast<std::ptrdiff_t>(i);
      y_local.push_back(input.y[test[i]]);
      g_local.push_back(group[test[i]]);
    }
    const auto fold_pairs = pairs_fn ? pairs_fn(fold, train, test) : input.pairs;
    std::vector<std::pair<std::size_t, std::size_t>> pairs_local;
    std::vector<char> in_pair(test.size(), 0);
    for (const auto& [r0, r1] : fold_pairs) {
      if (r0 >= input.n_rows || r1 >= input.n_rows) throw DataError("audit: pair row out of range");
      if (local[r0] < 0 || local[r1] < 0) continue;
      const auto a = static_cast<std::size_t>(local[r0]), b = static_cast<std::size_t>(local[r1]);
      pairs_local.emplace_back(a, b);
      in_pair[a] = in_pair[b] = 1;
    }
    std::vector<std::size_t> cp_rows, un_rows, all_rows;
    for (std::size_t i = 0; i < test.size(); ++i) {
      all_rows.push_back(i);
      (in_pair[i] ? cp_rows : un_rows).push_back(i);
    }

    const SliceMetrics slices[] = {
        evaluate_slice("counterparts", y_local, proba_test, g_local, cp_rows, pairs_local, input.positive_class),
        evaluate_slice("unmatched", y_local, proba_test, g_local, un_rows, {}, input.positive_class),
        evaluate_slice("total", y_local, proba_test, g_local, all_rows, {}, input.positive_class),
    };
    for (const auto& s : slices)
      for (auto& r : flatten(s, fold, report.class_names)) report.records.push_back(std::move(r));
  }
  report.summary = summarize(report.records);
  return report;
}

std::string to_json(const FairnessReport& report) {
  nlohmann::ordered_json doc;
  doc["format"] = "cfair.fairness_report";
  doc["version"] = 1;
  doc["seed"] = report.seed;
  doc["model_id"] = report.model_id;
  doc["config_hash"] = report.config_hash;
  doc["class_names"] = report.class_names;
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  auto& recs = doc["records"] = nlohmann::ordered_json::array();
  for (const auto& r : report.records)
    recs.push_back({{"fold", r.fold}, {"slice", r.slice}, {"metric", r.metric}, {"class", r.cls},
                    {"value", num(r.value)}, {"p_value", num(r.p_value)}});
  auto& sum = doc["summary"] = nlohmann::ordered_json::array();
  for (const auto& s : report.summary)
    sum.push_back({{"slice", s.slice}, {"metric", s.metric}, {"class", s.cls}, {"mean", num(s.mean)},
                   {"std", num(s.stddev)}, {"n_folds", s.n_folds}});
  return doc.dump(2);
}

void write_report_csv(std::ostream& out, const FairnessReport& report) {
  csv::Writer w(out, "cfair.fairness_report/1", {"slice", "metric", "class", "value", "p_value", "fold"});
  auto num = [](double v) { return std::isnan(v) ? std::string() : csv::format_number(v); };
  for (const auto& r : report.records)
    w.row({r.slice, r.metric, r.cls, num(r.value), num(r.p_value), std::to_string(r.fold)});
  for (const auto& s : report.summary) {
    w.row({s.slice, s.metric, s.cls, num(s.mean), "", "mean"});
    w.row({s.slice, s.metric, s.cls, num(s.stddev), "", "std"});
  }
}

}  // namespace cfair::fairness
