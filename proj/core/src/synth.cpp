#include "cfair/synth.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <thread>

#include <json.hpp>

#include "cfair/csv.hpp"
#include "cfair/error.hpp"
#include "cfair/fairness.hpp"
#include "cfair/seed.hpp"
#include "cfair/stats.hpp"

namespace cfair::synth {

using json = nlohmann::json;

namespace {

void check_gaussian(const Gaussian2& g, const char* name) {
  if (!g.mean.allFinite() || !g.cov.allFinite()) throw ConfigError(std::string(name) + ": non-finite parameters");
  if (std::abs(g.cov(0, 1) - g.cov(1, 0)) > 1e-12) throw ConfigError(std::string(name) + ": covariance not symmetric");
  Eigen::LLT<Eigen::Matrix2d> llt(g.cov);
  if (llt.info() != Eigen::Success) throw ConfigError(std::string(name) + ": covariance not positive definite");
}

json gaussian_json(const Gaussian2& g) {
  return {{"mean", {g.mean(0), g.mean(1)}},
          {"cov", {{g.cov(0, 0), g.cov(0, 1)}, {g.cov(1, 0), g.cov(1, 1)}}}};
}

Gaussian2 gaussian_from(const json& j, Gaussian2 g) {
  for (const auto& [key, value] : j.items())
    if (key != "mean" && key != "cov") throw ConfigError("synth config: unknown gaussian key '" + key + "'");
  if (j.contains("mean")) {
    const auto m = j.at("mean").get<std::vector<double>>();
    if (m.size() != 2) throw ConfigError("synth config: mean must have 2 entries");
    g.mean = {m[0], m[1]};
  }
  if (j.contains("cov")) {
    const auto c = j.at("cov").get<std::vector<std::vector<double>>>();
    if (c.size() != 2 || c[0].size() != 2 || c[1].size() != 2) throw ConfigError("synth config: cov must be 2x2");
    g.cov << c[0][0], c[0][1], c[1][0], c[1][1];
  }
  return g;
}

int label(const Eigen::Vector2d& x, double offset) { return x(1) - x(0) - offset > 0.0 ? 1 : 0; }


GapStat stat_of(const std::vector<double>& v) {
  GapStat s;
  s.mean = stats::mean(v);
  s.stddev = v.size() >= 2 ? stats::stddev(v) : 0.0;
  return s;
}

json gap_summary_json(const GapSummary& g) {
  auto one = [](const GapStat& s) { return json{{"mean", s.mean}, {"std", s.stddev}}; };
  return {{"dp_before", one(g.dp_before)},
          {"cdp_before", one(g.cdp_before)},
          {"dp_after", one(g.dp_after)},
          {"cdp_after", one(g.cdp_after)}};
}

}  // namespace

void SynthConfig::validate() const {
  check_gaussian(g0_main, "g0_main");
  check_gaussian(shared, "shared");
  check_gaussian(g1_main, "g1_main");
  if (n_g0_main <= 0 || n_g1_main <= 0 || n_pairs <= 0) throw ConfigError("synth config: counts must be positive");
  if (!(noise_variance >= 0.0)) throw ConfigError("synth config: noise_variance must be non-negative");
  if (repeats <= 0) throw ConfigError("synth config: repeats must be positive");
  if (threads < 0) throw ConfigError("synth config: threads must be non-negative");
  for (double t : {decision_threshold, shifted_threshold})
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("synth config: thresholds must lie in [0, 1]");
  classifier.validate();
}

std::string to_json(const SynthConfig& c) {
  json doc = {{"g0_main", gaussian_json(c.g0_main)},
              {"shared", gaussian_json(c.shared)},
              {"g1_main", gaussian_json(c.g1_main)},
              {"n_g0_main", c.n_g0_main},
              {"n_g1_main", c.n_g1_main},
              {"n_pairs", c.n_pairs},
              {"noise_variance", c.noise_variance},
              {"label_offset_g0_main", c.label_offset_g0_main},
              {"label_offset_shared", c.label_offset_shared},
              {"label_offset_g1_main", c.label_offset_g1_main},
              {"decision_threshold", c.decision_threshold},
              {"shifted_threshold", c.shifted_threshold},
              {"repeats", c.repeats},
              {"seed", c.seed},
              {"classifier", json::parse(models::to_json(c.classifier))},
              {"threads", c.threads}};
  return doc.dump();
}

SynthConfig synth_config_from_json(std::string_view text) {
  SynthConfig c;
  try {
    const auto doc = json::parse(text);
    if (!doc.is_object()) throw ConfigError("synth config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (key == "g0_main") c.g0_main = gaussian_from(value, c.g0_main);
      else if (key == "shared") c.shared = gaussian_from(value, c.shared);
      else if (key == "g1_main") c.g1_main = gaussian_from(value, c.g1_main);
      else if (key == "n_g0_main") c.n_g0_main = value.get<int>();
      else if (key == "n_g1_main") c.n_g1_main = value.get<int>();
      else if (key == "n_pairs") c.n_pairs = value.get<int>();
      else if (key == "noise_variance") c.noise_variance = value.get<double>();
      else if (key == "label_offset_g0_main") c.label_offset_g0_main = value.get<double>();
      else if (key == "label_offset_shared") c.label_offset_shared = value.get<double>();
      else if (key == "label_offset_g1_main") c.label_offset_g1_main = value.get<double>();
      else if (key == "decision_threshold") c.decision_threshold = value.get<double>();
      else if (key == "shifted_threshold") c.shifted_threshold = value.get<double>();
      else if (key == "repeats") c.repeats = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "threads") c.threads = value.get<int>();
      else if (key == "classifier") {
        auto merged = json::parse(models::to_json(c.classifier));
        merged.merge_patch(value);
        c.classifier = models::train_config_from_json(merged.dump());
      } else {
        throw ConfigError("synth config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  c.validate();
  return c;
}

Eigen::MatrixXd sample_gaussian(const Gaussian2& g, int n, std::mt19937_64& rng) {
  check_gaussian(g, "gaussian");
  const Eigen::Matrix2d l = Eigen::LLT<Eigen::Matrix2d>(g.cov).matrixL();
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd out(n, 2);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector2d e;
    e(0) = z(rng);
    e(1) = z(rng);
    out.row(i) = (g.mean + l * e).transpose();
  }
  return out;
}

std::vector<std::size_t> SynthDataset::rows_of_group(int g) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < group.size(); ++i)
    if (group[i] == g) out.push_back(i);
  return out;
}

SynthDataset generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd a = sample_gaussian(config.g0_main, config.n_g0_main, rng);
  const Eigen::MatrixXd b = sample_gaussian(config.g1_main, config.n_g1_main, rng);
  const Eigen::MatrixXd s = sample_gaussian(config.shared, config.n_pairs, rng);
  std::normal_distribution<double> noise(0.0, std::sqrt(config.noise_variance));

  const auto n0 = config.n_g0_main + config.n_pairs;
  const auto n = n0 + config.n_g1_main + config.n_pairs;
  SynthDataset d;
  d.x.resize(n, 2);
  d.y.resize(static_cast<std::size_t>(n));
  d.group.assign(static_cast<std::size_t>(n), 0);
  d.pair_id.assign(static_cast<std::size_t>(n), -1);

  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i, ++r) {
    d.x.row(r) = a.row(i);
    d.y[static_cast<std::size_t>(r)] = label(a.row(i).transpose(), config.label_offset_g0_main);
  }
  for (Eigen::Index i = 0; i < s.rows(); ++i, ++r) {
    d.x(r, 0) = s(i, 0) + noise(rng);
    d.x(r, 1) = s(i, 1) + noise(rng);
    // Counterparts share the label of the clean point.
    d.y[static_cast<std::size_t>(r)] = label(s.row(i).transpose(), config.label_offset_shared);
    d.pair_id[static_cast<std::size_t>(r)] = static_cast<int>(i);
  }
  for (Eigen::Index i = 0; i < b.rows(); ++i, ++r) {
    d.x.row(r) = b.row(i);
    d.y[static_cast<std::size_t>(r)] = label(b.row(i).transpose(), config.label_offset_g1_main);
    d.group[static_cast<std::size_t>(r)] = 1;
  }
  for (Eigen::Index i = 0; i < s.rows(); ++i, ++r) {
    d.x.row(r) = s.row(i);
    d.y[static_cast<std::size_t>(r)] = label(s.row(i).transpose(), config.label_offset_shared);
    d.group[static_cast<std::size_t>(r)] = 1;
    d.pair_id[static_cast<std::size_t>(r)] = static_cast<int>(i);
    d.pairs.emplace_back(static_cast<std::size_t>(config.n_g0_main + i), static_cast<std::size_t>(r));
  }
  return d;
}

Table SynthDataset::to_table() const {
  std::vector<Column> cols = {{"x1", ColumnKind::numeric, {}},
                              {"x2", ColumnKind::numeric, {}},
                              {"group", ColumnKind::binary, {}},
                              {"label", ColumnKind::binary, {}}};
  std::vector<double> values;
  values.reserve(n_rows() * cols.size());
  for (std::size_t i = 0; i < n_rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    values.insert(values.end(), {x(r, 0), x(r, 1), static_cast<double>(group[i]), static_cast<double>(y[i])});
  }
  return Table(std::move(cols), std::move(values), n_rows());
}

void SynthDataset::write_csv(std::ostream& out) const {
  csv::Writer w(out, "cfair.synth_dataset/1", {"x1", "x2", "group", "label", "pair_id"});
  for (std::size_t i = 0; i < n_rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    w.row({csv::format_number(x(r, 0)), csv::format_number(x(r, 1)), std::to_string(group[i]), std::to_string(y[i]),
           pair_id[i] < 0 ? std::string() : std::to_string(pair_id[i])});
  }
}

RepeatResult run_repeat(const SynthConfig& config, int repeat) {
  RepeatResult out;
  out.repeat = repeat;
  out.seed = derive_seed(config.seed, static_cast<std::uint64_t>(repeat));
  const SynthDataset d = generate_synthetic(config, out.seed);

  models::Classifier model;
  try {
    model = models::train_classifier(d.x, d.y, config.classifier, {"x1", "x2"});
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " (synth repeat " + std::to_string(repeat) + ", seed " +
                         std::to_string(out.seed) + ")");
  }
  const Eigen::MatrixXd proba = models::predict_proba(model, d.x);

  std::vector<double> p0, p1, pc0, pc1;
  for (std::size_t i = 0; i < d.n_rows(); ++i) (d.group[i] == 0 ? p0 : p1).push_back(proba(static_cast<Eigen::Index>(i), 1));
  for (const auto& [r0, r1] : d.pairs) {
    pc0.push_back(proba(static_cast<Eigen::Index>(r0), 1));
    pc1.push_back(proba(static_cast<Eigen::Index>(r1), 1));
  }

  auto decide = [](const std::vector<double>& p, double t) {
    std::vector<double> h(p.size());
    std::transform(p.begin(), p.end(), h.begin(), [t](double v) { return v > t ? 1.0 : 0.0; });
    return h;
  };
  const double t = config.decision_threshold, t0 = config.shifted_threshold;
  const auto h1 = decide(p1, t), hc1 = decide(pc1, t);
  out.thresholded.dp_before = fairness::dp_gap(decide(p0, t), h1);
  out.thresholded.cdp_before = fairness::dp_gap(decide(pc0, t), hc1);
  out.thresholded.dp_after = fairness::dp_gap(decide(p0, t0), h1);
  out.thresholded.cdp_after = fairness::dp_gap(decide(pc0, t0), hc1);

  out.probability.dp_before = out.probability.dp_after = fairness::dp_gap(p0, p1);
  out.probability.cdp_before = out.probability.cdp_after = fairness::dp_gap(pc0, pc1);
  return out;
}

GapSummary summarize(const std::vector<GapSet>& gaps) {
  if (gaps.empty()) throw DataError("synth summary: no repeats");
  std::vector<double> a, b, c, e;
  for (const auto& g : gaps) {
    a.push_back(g.dp_before);
    b.push_back(g.cdp_before);
    c.push_back(g.dp_after);
    e.push_back(g.cdp_after);
  }
  return {stat_of(a), stat_of(b), stat_of(c), stat_of(e)};
}

SynthSummary run_synthetic_experiment(const SynthConfig& config) {
  config.validate();
  SynthSummary out;
  out.config = config;
  out.repeats.resize(static_cast<std::size_t>(config.repeats));

  unsigned workers = config.threads > 0 ? static_cast<unsigned>(config.threads) : std::thread::hardware_concurrency();
  workers = std::clamp(workers, 1u, static_cast<unsigned>(config.repeats));
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int r = static_cast<int>(w); r < config.repeats; r += static_cast<int>(workers))
          out.repeats[static_cast<std::size_t>(r)] = run_repeat(config, r);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<GapSet> th, pr;
  for (const auto& r : out.repeats) {
    th.push_back(r.thresholded);
    pr.push_back(r.probability);
  }
  out.thresholded = summarize(th);
  out.probability = summarize(pr);
  return out;
}

std::string to_json(const SynthSummary& s) {
  json repeats = json::array();
  for (const auto& r : s.repeats) {
    auto gaps = [](const GapSet& g) {
      return json{{"dp_before", g.dp_before}, {"cdp_before", g.cdp_before}, {"dp_after", g.dp_after},
                  {"cdp_after", g.cdp_after}};
    };
    repeats.push_back({{"repeat", r.repeat}, {"seed", r.seed}, {"thresholded", gaps(r.thresholded)},
                       {"probability", gaps(r.probability)}});
  }
  json doc = {{"format", "cfair.synth_summary"},
              {"version", 1},
              {"config", json::parse(to_json(s.config))},
              {"thresholded", gap_summary_json(s.thresholded)},
              {"probability", gap_summary_json(s.probability)},
              {"repeats", repeats}};
  return doc.dump(2);
}

void write_summary_csv(std::ostream& out, const SynthSummary& s) {
  csv::Writer w(out, "cfair.synth_summary/1",
                {"repeat", "seed", "convention", "dp_before", "cdp_before", "dp_after", "cdp_after"});
  auto f = csv::format_number;
  for (const auto& r : s.repeats) {
    for (const auto& [name, g] : {std::pair{"thresholded", r.thresholded}, std::pair{"probability", r.probability}})
      w.row({std::to_string(r.repeat), std::to_string(r.seed), name, f(g.dp_before), f(g.cdp_before), f(g.dp_after),
             f(g.cdp_after)});
  }
  for (const auto& [name, g] : {std::pair{"thresholded", s.thresholded}, std::pair{"probability", s.probability}}) {
    w.row({"mean", "", name, f(g.dp_before.mean), f(g.cdp_before.mean), f(g.dp_after.mean), f(g.cdp_after.mean)});
    w.row({"std", "", name, f(g.dp_before.stddev), f(g.cdp_before.stddev), f(g.dp_after.stddev),
           f(g.cdp_after.stddev)});
  }
}

}  // namespace cfair::synth
