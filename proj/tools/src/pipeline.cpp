#include "cfair_tools/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "cfair/compas.hpp"
#include "cfair/csv.hpp"
#include "cfair/error.hpp"
#include "cfair/fairness.hpp"
#include "cfair/seed.hpp"

namespace cfair::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* to_string(Command c) noexcept {
  switch (c) {
    case Command::ingest: return "ingest";
    case Command::propensity: return "propensity";
    case Command::match: return "match";
    case Command::audit: return "audit";
    case Command::synth: return "synth";
    case Command::foldnorm: return "foldnorm";
  }
  return "?";
}

Command command_from_string(std::string_view text) {
  for (Command c : {Command::ingest, Command::propensity, Command::match, Command::audit, Command::synth,
                    Command::foldnorm})
    if (text == to_string(c)) return c;
  throw ConfigError("unknown command '" + std::string(text) + "'");
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));
  return buf;
}

namespace {

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown config key '" + section + "." + key + "'");
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

models::TrainConfig model_config(const json& j, models::TrainConfig fallback) {
  if (j.is_null()) return fallback;
  json merged = json::object();
  // An explicit kind resets kind-specific defaults.
  if (!j.contains("kind")) merged = json::parse(models::to_json(fallback));
  merged.merge_patch(j);
  return models::train_config_from_json(merged.dump());
}

void write_file(const RunConfig& config, const std::string& name, const std::function<void(std::ostream&)>& body) {
  fs::create_directories(config.output_dir);
  const fs::path path = fs::path(config.output_dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  body(out);
  if (!out) throw ConfigError("failed writing " + path.string());
}

void write_json(const RunConfig& config, const std::string& name, const json& doc) {
  write_file(config, name, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

json artifact_header(const RunConfig& config, const std::string& format) {
  return {{"format", format}, {"version", 1}, {"config_hash", config.hash()}, {"seed", config.seed}};
}

bool artifact_current(const RunConfig& config, const std::string& name) {
  const fs::path path = fs::path(config.output_dir) / name;
  if (!fs::exists(path)) return false;
  try {
    std::ifstream in(path);
    const auto doc = json::parse(in);
    return doc.value("config_hash", "") == config.hash();
  } catch (const json::exception&) {
    return false;
  }
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(v[r]);
  return out;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}

/// Class probabilities padded to `k` columns.
Eigen::MatrixXd padded_proba(const models::Classifier& model, const Eigen::MatrixXd& x, int k) {
  Eigen::MatrixXd p = models::predict_proba(model, x);
  if (p.cols() >= k) return p;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p.rows(), k);
  out.leftCols(p.cols()) = p;
  return out;
}

models::Classifier train_with_seed(const Eigen::MatrixXd& x, const std::vector<int>& y, models::TrainConfig cfg,
                                   const std::vector<std::string>& names, bool smote, int smote_k,
                                   std::uint64_t seed) {
  cfg.seed = derive_seed(seed, "model");
  if (smote) {
    const auto r = models::smote_oversample(x, y, smote_k, derive_seed(seed, "smote"));
    return models::train_classifier(r.x, r.y, cfg, names);
  }
  return models::train_classifier(x, y, cfg, names);
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const Overrides& overrides) {
  json j;
  try {
    j = json_text.empty() ? json::object() : json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (overrides.seed) j["seed"] = *overrides.seed;
  if (overrides.output_dir) j["output_dir"] = *overrides.output_dir;
  if (overrides.percentile) j["caliper"]["percentile"] = *overrides.percentile;
  if (overrides.psd) j["metric"]["psd_projection"] = *overrides.psd;
  if (overrides.rematch_per_fold) j["audit"]["rematch_per_fold"] = true;

  RunConfig c;
  c.propensity_model.kind = models::ModelKind::logistic;
  c.propensity_candidates = {models::ModelKind::logistic, models::ModelKind::forest, models::ModelKind::adaboost};
  c.outcome_model.kind = models::ModelKind::forest;
  try {
    check_keys(j, {"seed", "output_dir", "dataset", "preprocess", "propensity", "caliper", "metric", "matching",
                   "audit", "synth", "foldnorm"},
               "config");
    if (!j.contains("seed") || !j.at("seed").is_number_unsigned())
      throw ConfigError("a non-negative integer seed is required (config \"seed\" or --seed)");
    c.seed = j.at("seed").get<std::uint64_t>();
    read_opt(j, "output_dir", c.output_dir);

    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      check_keys(d, {"path", "format", "schema", "protected_column", "target_column", "features"}, "dataset");
      read_opt(d, "path", c.dataset_path);
      read_opt(d, "format", c.dataset_format);
      if (c.dataset_format != "table" && c.dataset_format != "compas")
        throw ConfigError("dataset.format must be \"table\" or \"compas\"");
      if (d.contains("schema")) c.schema = Schema::from_json(d.at("schema").dump());
      read_opt(d, "protected_column", c.protected_column);
      read_opt(d, "target_column", c.target_column);
      read_opt(d, "features", c.features);
    }
    if (c.dataset_format == "compas") {
      if (c.protected_column.empty()) c.protected_column = std::string(compas::kProtectedColumn);
      if (c.target_column.empty()) c.target_column = std::string(compas::kTargetColumn);
      if (c.features.empty()) c.features = compas::feature_names();
    } else if (c.schema && c.target_column.empty()) {
      c.target_column = c.schema->target;
    }

    if (j.contains("preprocess")) {
      const auto& p = j.at("preprocess");
      check_keys(p, {"outlier_columns", "lo", "hi"}, "preprocess");
      read_opt(p, "outlier_columns", c.outlier_columns);
      read_opt(p, "lo", c.outlier_lo);
      read_opt(p, "hi", c.outlier_hi);
      if (!(0.0 <= c.outlier_lo && c.outlier_lo < c.outlier_hi && c.outlier_hi <= 100.0))
        throw ConfigError("preprocess: need 0 <= lo < hi <= 100");
    }
    if (j.contains("propensity")) {
      const auto& p = j.at("propensity");
      check_keys(p, {"model", "smote", "smote_neighbors", "candidates", "clamp"}, "propensity");
      if (p.contains("model")) c.propensity_model = model_config(p.at("model"), c.propensity_model);
      read_opt(p, "smote", c.propensity_smote);
      read_opt(p, "smote_neighbors", c.smote_neighbors);
      if (p.contains("candidates")) {
        c.propensity_candidates.clear();
        for (const auto& k : p.at("candidates")) c.propensity_candidates.push_back(models::model_kind_from_string(k.get<std::string>()));
      }
      read_opt(p, "clamp", c.clamp);
      if (!(c.clamp > 0.0 && c.clamp < 0.5)) throw ConfigError("propensity.clamp must lie in (0, 0.5)");
      if (c.smote_neighbors < 1) throw ConfigError("propensity.smote_neighbors must be positive");
    }
    if (j.contains("caliper")) {
      const auto& p = j.at("caliper");
      check_keys(p, {"percentile", "delta", "pair_budget"}, "caliper");
      read_opt(p, "percentile", c.percentile);
      if (p.contains("delta") && !p.at("delta").is_null()) c.delta = p.at("delta").get<double>();
      read_opt(p, "pair_budget", c.pair_budget);
      if (!(c.percentile >= 0.0 && c.percentile <= 100.0)) throw ConfigError("caliper.percentile must lie in [0, 100]");
      if (c.delta && !(*c.delta >= 0.0)) throw ConfigError("caliper.delta must be non-negative");
      if (c.pair_budget == 0) throw ConfigError("caliper.pair_budget must be positive");
    }
    if (j.contains("metric")) {
      const auto& p = j.at("metric");
      check_keys(p, {"learning_rate", "max_iterations", "epsilon0", "psd_projection"}, "metric");
      read_opt(p, "learning_rate", c.metric.learning_rate);
      read_opt(p, "max_iterations", c.metric.max_iterations);
      read_opt(p, "epsilon0", c.metric.epsilon0);
      read_opt(p, "psd_projection", c.metric.psd_projection);
    }
    c.metric.seed = derive_seed(c.seed, "metric");
    c.metric.validate();
    if (j.contains("matching")) {
      const auto& p = j.at("matching");
      check_keys(p, {"order", "balance_test"}, "matching");
      const auto order = p.value("order", std::string("dissimilarity"));
      if (order == "dissimilarity") c.order = matching::MatchOrder::dissimilarity;
      else if (order == "probability") c.order = matching::MatchOrder::probability;
      else throw ConfigError("matching.order must be \"dissimilarity\" or \"probability\"");
      const auto test = p.value("balance_test", std::string("welch"));
      if (test == "welch") c.balance_test = stats::TTestFlavor::welch;
      else if (test == "student") c.balance_test = stats::TTestFlavor::student;
      else throw ConfigError("matching.balance_test must be \"welch\" or \"student\"");
    }
    if (j.contains("audit")) {
      const auto& p = j.at("audit");
      check_keys(p, {"model", "features", "folds", "rematch_per_fold", "positive_class"}, "audit");
      if (p.contains("model")) c.outcome_model = model_config(p.at("model"), c.outcome_model);
      read_opt(p, "features", c.outcome_features);
      read_opt(p, "folds", c.folds);
      read_opt(p, "rematch_per_fold", c.rematch_per_fold);
      read_opt(p, "positive_class", c.positive_class);
      if (c.folds < 2) throw ConfigError("audit.folds must be at least 2");
      if (c.positive_class < 0) throw ConfigError("audit.positive_class must be non-negative");
    }
    if (j.contains("synth")) {
      json s = j.at("synth");
      if (!s.is_object()) throw ConfigError("config section 'synth' must be an object");
      if (!s.contains("seed")) s["seed"] = derive_seed(c.seed, "synth");
      c.synth = synth::synth_config_from_json(s.dump());
    } else {
      c.synth.seed = derive_seed(c.seed, "synth");
    }
    if (j.contains("foldnorm")) {
      const auto& p = j.at("foldnorm");
      check_keys(p, {"delta_nu", "sigma1", "points"}, "foldnorm");
      read_opt(p, "delta_nu", c.foldnorm.delta_nu);
      read_opt(p, "sigma1", c.foldnorm.sigma1);
      read_opt(p, "points", c.foldnorm.points);
      if (c.foldnorm.points < 2) throw ConfigError("foldnorm.points must be at least 2");
      for (double s : c.foldnorm.sigma1)
        if (!(s > 0.0)) throw ConfigError("foldnorm.sigma1 entries must be positive");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.canonical = j.dump();
  return c;
}

RunConfig load_run_config(const std::string& path, const Overrides& overrides) {
  if (path.empty()) return parse_run_config("", overrides);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  RunConfig c = parse_run_config(text.str(), overrides);
  // Dataset paths are relative to the config file.
  if (!c.dataset_path.empty() && fs::path(c.dataset_path).is_relative())
    c.dataset_path = (fs::path(path).parent_path() / c.dataset_path).lexically_normal().string();
  return c;
}

Prepared prepare(const RunConfig& config) {
  if (config.dataset_path.empty()) throw ConfigError("dataset.path is required for this command");
  if (config.protected_column.empty()) throw ConfigError("dataset.protected_column is required");
  if (config.target_column.empty()) throw ConfigError("dataset.target_column is required");
  Prepared d;
  if (config.dataset_format == "compas") {
    d.raw = compas::load(config.dataset_path);
  } else {
    if (!config.schema) throw ConfigError("dataset.schema is required for table datasets");
    d.raw = load_table(config.dataset_path, *config.schema);
  }
  for (const auto* name : {&config.protected_column, &config.target_column})
    if (!d.raw.has_column(*name)) throw ConfigError("column '" + *name + "' is not in the dataset");
  std::vector<std::string> features = config.features;
  if (features.empty())
    for (const auto& c : d.raw.column_names())
      if (c != config.protected_column && c != config.target_column) features.push_back(c);
  for (const auto& group : {features, config.outcome_features, config.outlier_columns})
    for (const auto& f : group) {
      if (!d.raw.has_column(f)) throw ConfigError("column '" + f + "' is not in the dataset");
      if (f == config.protected_column) throw ConfigError("the protected column cannot be a feature");
    }

  const std::vector<std::string> unscaled = {config.protected_column, config.target_column};
  d.pre = preprocess(d.raw, config.outlier_columns, config.outlier_lo, config.outlier_hi, unscaled);
  const Table& t = d.pre.table;
  d.split = split_groups(t, config.protected_column);
  d.membership = d.split.membership(t.n_rows());
  d.features = models::encode_features(t, features);
  d.outcome_features = config.outcome_features.empty() ? d.features
                                                        : models::encode_features(t, config.outcome_features);
  d.y = t.labels(config.target_column);
  const Column& target = t.column_info(config.target_column);
  if (target.kind == ColumnKind::categorical) {
    d.class_names = target.levels;
  } else {
    const int k = std::max(2, models::count_classes(d.y));
    for (int c = 0; c < k; ++c) d.class_names.push_back(std::to_string(c));
  }
  return d;
}

PropensityStage fit_propensity(const RunConfig& config, const Prepared& data, const std::vector<std::size_t>& train_rows,
                               const std::vector<std::size_t>& score0, const std::vector<std::size_t>& score1,
                               std::uint64_t seed) {
  const auto rows = train_rows.empty() ? all_rows(data.membership.size()) : train_rows;
  PropensityStage out;
  out.model = train_with_seed(rows_of(data.features.x, rows), pick(data.membership, rows), config.propensity_model,
                              data.features.names, config.propensity_smote, config.smote_neighbors, seed);
  out.s0 = propensity::propensity_scores(out.model, rows_of(data.features.x, score0), config.protected_column,
                                         config.clamp);
  out.s1 = propensity::propensity_scores(out.model, rows_of(data.features.x, score1), config.protected_column,
                                         config.clamp);
  return out;
}

MatchStage match_groups(const RunConfig& config, const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x1,
                        const propensity::PropensityScores& s0, const propensity::PropensityScores& s1,
                        std::uint64_t seed) {
  MatchStage m;
  m.delta = config.delta ? *config.delta
                         : propensity::delta_threshold(s0, s1, config.percentile, config.pair_budget,
                                                       derive_seed(seed, "caliper"));
  m.candidates = propensity::build_candidates(s0, s1, m.delta);
  m.groups = matching::delta_groups(m.candidates);

  // The metric is learned on the delta-elements only.
  propensity::CandidateSet compact;
  compact.delta = m.candidates.delta;
  compact.n1 = m.candidates.n1;
  for (std::size_t n : m.groups.c0) compact.lists.push_back(m.candidates.lists[n]);
  m.learned = metric::learn_metric(rows_of(x0, m.groups.c0), x1, compact, config.metric);
  m.pairs = matching::greedy_match(m.candidates, m.learned.metric, x0, x1, config.order, config.metric.epsilon0);
  return m;
}

namespace {

struct ScoredGroups {
  PropensityStage stage;
  bool reused = false;
};

std::vector<std::pair<std::string, std::vector<double>>> propensity_model_selection(const RunConfig& config,
                                                                                    const Prepared& data) {
  const auto plan = make_folds(data.membership.size(), config.folds, data.split,
                               derive_seed(config.seed, "propensity_cv"));
  std::vector<std::pair<std::string, std::vector<double>>> out;
  for (models::ModelKind kind : config.propensity_candidates) {
    models::TrainConfig cfg = kind == config.propensity_model.kind ? config.propensity_model : models::TrainConfig{};
    if (kind != config.propensity_model.kind) {
      cfg.kind = kind;
      if (kind == models::ModelKind::adaboost) cfg.max_depth = 3;
    }
    std::vector<double> scores;
    for (int f = 0; f < plan.k; ++f) {
      const auto train = plan.train_rows(f), test = plan.test_rows(f);
      const auto model = train_with_seed(rows_of(data.features.x, train), pick(data.membership, train), cfg,
                                         data.features.names, config.propensity_smote, config.smote_neighbors,
                                         derive_seed(config.seed, "propensity_cv/" + std::to_string(f)));
      scores.push_back(models::macro_f1(pick(data.membership, test), models::predict(model, rows_of(data.features.x, test)), 2));
    }
    out.emplace_back(models::to_string(kind), std::move(scores));
  }
  return out;
}

void write_propensity_artifacts(const RunConfig& config, const Prepared& data, const PropensityStage& p) {
  write_file(config, "propensity_scores.csv",
             [&](std::ostream& out) { propensity::write_scores_csv(out, data.split, p.s0, p.s1); });
  write_file(config, "propensity_histogram.csv",
             [&](std::ostream& out) { propensity::write_histogram_csv(out, propensity::histogram(p.s0, p.s1)); });
  write_file(config, "propensity_model.json",
             [&](std::ostream& out) { out << models::to_json(p.model, config.propensity_model) << '\n'; });
}

ScoredGroups load_or_fit_propensity(const RunConfig& config, const Prepared& data, bool write_artifacts) {
  ScoredGroups out;
  if (artifact_current(config, "propensity_summary.json")) {
    const auto doc = csv::read_file((fs::path(config.output_dir) / "propensity_scores.csv").string());
    std::map<std::size_t, double> by_row;
    for (const auto& row : doc.rows) by_row[std::stoul(row.at(0))] = std::stod(row.at(2));
    bool ok = by_row.size() == data.membership.size();
    for (auto* dst : {&out.stage.s0, &out.stage.s1}) dst->clamp = config.clamp;
    if (ok) {
      for (std::size_t r : data.split.g0) out.stage.s0.score.push_back(by_row.at(r));
      for (std::size_t r : data.split.g1) out.stage.s1.score.push_back(by_row.at(r));
      out.reused = true;
      return out;
    }
  }
  out.stage = fit_propensity(config, data, {}, data.split.g0, data.split.g1, derive_seed(config.seed, "propensity"));
  if (write_artifacts) write_propensity_artifacts(config, data, out.stage);
  return out;
}

void write_ingest(const RunConfig& config, const Prepared& data) {
  write_file(config, "table.csv", [&](std::ostream& out) { data.pre.table.write_csv(out); });
  json doc = artifact_header(config, "cfair.ingest_summary");
  doc["rows_loaded"] = data.raw.n_rows();
  doc["rows_kept"] = data.pre.table.n_rows();
  doc["rows_removed"] = data.raw.n_rows() - data.pre.table.n_rows();
  json scaling = json::array();
  for (const auto& e : data.pre.scaling.entries)
    scaling.push_back({{"column", e.column}, {"mean", e.mean}, {"stddev", e.stddev}});
  doc["scaling"] = scaling;
  doc["protected_column"] = config.protected_column;
  doc["g0_code"] = data.split.g0_code;
  doc["g0_size"] = data.split.g0.size();
  doc["g1_size"] = data.split.g1.size();
  doc["features"] = data.features.names;
  write_json(config, "ingest_summary.json", doc);
}

void run_propensity(const RunConfig& config, const Prepared& data) {
  const auto p = fit_propensity(config, data, {}, data.split.g0, data.split.g1, derive_seed(config.seed, "propensity"));
  write_propensity_artifacts(config, data, p);

  const auto selection = propensity_model_selection(config, data);
  write_file(config, "propensity_f1.csv", [&](std::ostream& out) {
    csv::Writer w(out, "cfair.propensity_f1/1", {"model", "fold", "macro_f1"});
    for (const auto& [name, scores] : selection) {
      for (std::size_t f = 0; f < scores.size(); ++f)
        w.row({name, std::to_string(f), csv::format_number(scores[f])});
      w.row({name, "mean", csv::format_number(stats::mean(scores))});
      w.row({name, "std", csv::format_number(stats::stddev(scores))});
    }
  });
  json doc = artifact_header(config, "cfair.propensity_summary");
  doc["model"] = models::to_string(config.propensity_model.kind);
  doc["g0_size"] = p.s0.size();
  doc["g1_size"] = p.s1.size();
  doc["clamp"] = config.clamp;
  json sel = json::object();
  for (const auto& [name, scores] : selection)
    sel[name] = {{"mean", stats::mean(scores)}, {"std", stats::stddev(scores)}};
  doc["macro_f1"] = sel;
  write_json(config, "propensity_summary.json", doc);
}

struct MatchOutput {
  MatchStage stage;
  std::vector<std::pair<std::size_t, std::size_t>> table_pairs;
};

MatchOutput run_match(const RunConfig& config, const Prepared& data) {
  const auto scored = load_or_fit_propensity(config, data, true);
  const Eigen::MatrixXd x0 = rows_of(data.features.x, data.split.g0);
  const Eigen::MatrixXd x1 = rows_of(data.features.x, data.split.g1);
  MatchOutput out;
  out.stage = match_groups(config, x0, x1, scored.stage.s0, scored.stage.s1, config.seed);
  out.table_pairs = out.stage.pairs.table_rows(data.split);

  write_file(config, "pairs.csv",
             [&](std::ostream& os) { matching::write_pairs_csv(os, out.stage.pairs, data.split); });
  write_file(config, "metric.json",
             [&](std::ostream& os) { os << metric::to_json(out.stage.learned.metric, config.metric) << '\n'; });
  if (out.stage.pairs.size() >= 2) {
    std::vector<std::string> features = config.features;
    if (features.empty())
      for (const auto& c : data.pre.table.column_names())
        if (c != config.protected_column && c != config.target_column) features.push_back(c);
    const auto balance = matching::balance_report(out.stage.pairs, data.pre.table, data.split, features,
                                                  config.balance_test);
    write_file(config, "balance.csv", [&](std::ostream& os) { matching::write_balance_csv(os, balance); });
  }
  json doc = artifact_header(config, "cfair.match_summary");
  doc["delta"] = out.stage.delta;
  doc["percentile"] = config.percentile;
  doc["c0_size"] = out.stage.groups.c0.size();
  doc["c1_size"] = out.stage.groups.c1.size();
  doc["g0_size"] = data.split.g0.size();
  doc["g1_size"] = data.split.g1.size();
  doc["pairs"] = out.stage.pairs.size();
  doc["unmatched_g0"] = out.stage.pairs.unmatched_g0.size();
  doc["total_s"] = out.stage.pairs.total_cost();
  doc["metric_initial_cost"] = out.stage.learned.initial_cost;
  doc["metric_best_cost"] = out.stage.learned.best_cost;
  doc["metric_best_iteration"] = out.stage.learned.best_iteration;
  doc["propensity_reused"] = scored.reused;
  write_json(config, "match_summary.json", doc);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> load_or_match(const RunConfig& config, const Prepared& data) {
  if (artifact_current(config, "match_summary.json")) {
    const auto doc = csv::read_file((fs::path(config.output_dir) / "pairs.csv").string());
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& row : doc.rows) pairs.emplace_back(std::stoul(row.at(0)), std::stoul(row.at(1)));
    return pairs;
  }
  return run_match(config, data).table_pairs;
}

void run_audit(const RunConfig& config, const Prepared& data) {
  fairness::AuditInput input;
  input.y = data.y;
  input.split = data.split;
  input.n_rows = data.y.size();
  input.class_names = data.class_names;
  input.positive_class = config.positive_class;
  if (config.positive_class >= static_cast<int>(data.class_names.size()))
    throw ConfigError("audit.positive_class is not a class of the target");
  if (!config.rematch_per_fold) input.pairs = load_or_match(config, data);
  input.folds = make_folds(input.n_rows, config.folds, data.split, derive_seed(config.seed, "folds"), input.pairs);

  const int k = static_cast<int>(data.class_names.size());
  fairness::FoldModelFn model_fn = [&](int fold, const std::vector<std::size_t>& train,
                                       const std::vector<std::size_t>& test) {
    const auto model = train_with_seed(rows_of(data.outcome_features.x, train), pick(data.y, train),
                                       config.outcome_model, data.outcome_features.names, false, 0,
                                       derive_seed(config.seed, "outcome/" + std::to_string(fold)));
    return padded_proba(model, rows_of(data.outcome_features.x, test), k);
  };
  fairness::FoldPairsFn pairs_fn;
  if (config.rematch_per_fold) {
    pairs_fn = [&](int fold, const std::vector<std::size_t>& train, const std::vector<std::size_t>& test) {
      std::vector<std::size_t> t0, t1;
      for (std::size_t r : test) (data.membership[r] == 0 ? t0 : t1).push_back(r);
      std::vector<std::pair<std::size_t, std::size_t>> out;
      if (t0.empty() || t1.empty()) return out;
      const auto seed = derive_seed(config.seed, "rematch/" + std::to_string(fold));
      const auto p = fit_propensity(config, data, train, t0, t1, seed);
      try {
        const auto m = match_groups(config, rows_of(data.features.x, t0), rows_of(data.features.x, t1), p.s0, p.s1, seed);
        for (const auto& pr : m.pairs.pairs) out.emplace_back(t0[pr.g0], t1[pr.g1]);
      } catch (const SystematicDifferenceError&) {
        // No counterparts in this fold: the slice stays empty.
      }
      return out;
    };
  }
  auto report = fairness::audit(input, model_fn, pairs_fn);
  report.seed = config.seed;
  report.model_id = models::to_string(config.outcome_model.kind);
  report.config_hash = config.hash();
  write_file(config, "fairness_report.json", [&](std::ostream& os) { os << fairness::to_json(report) << '\n'; });
  write_file(config, "fairness_report.csv", [&](std::ostream& os) { fairness::write_report_csv(os, report); });
}

void run_synth(const RunConfig& config) {
  const auto summary = synth::run_synthetic_experiment(config.synth);
  write_file(config, "synth_summary.json", [&](std::ostream& os) {
    auto doc = json::parse(synth::to_json(summary));
    doc["config_hash"] = config.hash();
    os << doc.dump(2) << '\n';
  });
  write_file(config, "synth_summary.csv", [&](std::ostream& os) { synth::write_summary_csv(os, summary); });
  const auto dataset = synth::generate_synthetic(config.synth, summary.repeats.front().seed);
  write_file(config, "synth_dataset.csv", [&](std::ostream& os) { dataset.write_csv(os); });
}

void run_foldnorm(const RunConfig& config) {
  const auto& f = config.foldnorm;
  write_file(config, "foldnorm_summary.csv", [&](std::ostream& os) {
    csv::Writer w(os, "cfair.foldnorm_summary/1", {"delta_nu", "sigma1", "mean", "variance", "mean_derivative"});
    for (double dn : f.delta_nu)
      for (double s : f.sigma1) {
        const auto st = stats::folded_normal_stats({dn, s});
        w.row({csv::format_number(dn), csv::format_number(s), csv::format_number(st.mean),
               csv::format_number(st.variance), csv::format_number(st.mean_derivative)});
      }
  });
  write_file(config, "foldnorm_curves.csv", [&](std::ostream& os) {
    csv::Writer w(os, "cfair.foldnorm_curves/1", {"delta_nu", "sigma1", "x", "pdf"});
    for (double dn : f.delta_nu)
      for (double s : f.sigma1) {
        const auto st = stats::folded_normal_stats({dn, s});
        const double hi = std::abs(dn) + 5.0 * s;
        for (int i = 0; i < f.points; ++i) {
          const double x = hi * i / (f.points - 1);
          w.row({csv::format_number(dn), csv::format_number(s), csv::format_number(x), csv::format_number(st.pdf(x))});
        }
      }
  });
}

}  // namespace

void run_pipeline(Command command, const RunConfig& config) {
  switch (command) {
    case Command::synth: run_synth(config); return;
    case Command::foldnorm: run_foldnorm(config); return;
    default: break;
  }
  const Prepared data = prepare(config);
  switch (command) {
    case Command::ingest: write_ingest(config, data); break;
    case Command::propensity: run_propensity(config, data); break;
    case Command::match: run_match(config, data); break;
    case Command::audit: run_audit(config, data); break;
    default: break;
  }
}

int run_main(Command command, const std::string& config_path, const Overrides& overrides, std::ostream& log) {
  std::string out_dir = overrides.output_dir.value_or("");
  auto fail = [&](int code, const std::string& kind, const std::string& message) {
    log << "cfair " << to_string(command) << ": " << kind << " error: " << message << '\n';
    if (!out_dir.empty()) {
      try {
        fs::create_directories(out_dir);
        std::ofstream out(fs::path(out_dir) / "error.json");
        out << json{{"format", "cfair.error"}, {"version", 1}, {"command", to_string(command)}, {"kind", kind},
                    {"exit_code", code}, {"message", message}}
                   .dump(2)
            << '\n';
      } catch (...) {
      }
    }
    return code;
  };
  try {
    const RunConfig config = load_run_config(config_path, overrides);
    out_dir = config.output_dir;
    std::error_code ignored;
    fs::remove(fs::path(out_dir) / "error.json", ignored);
    run_pipeline(command, config);
    return 0;
  } catch (const Error& e) {
    return fail(e.exit_code(), to_string(e.kind()), e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(static_cast<int>(ErrorKind::config), "config", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
}

}  // namespace cfair::cli
