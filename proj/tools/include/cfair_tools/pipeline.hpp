#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfair/matching.hpp"
#include "cfair/metric.hpp"
#include "cfair/models.hpp"
#include "cfair/propensity.hpp"
#include "cfair/stats.hpp"
#include "cfair/synth.hpp"
#include "cfair/tabular.hpp"

namespace cfair::cli {

enum class Command { ingest, propensity, match, audit, synth, foldnorm };

const char* to_string(Command c) noexcept;
Command command_from_string(std::string_view text);

struct FoldnormConfig {
  std::vector<double> delta_nu{0.0, 0.05, 0.1, 0.2};
  std::vector<double> sigma1{0.02, 0.05, 0.1};
  int points = 201;
};

/// Parsed run configuration. `canonical` is the normalized JSON the run was
/// built from (overrides applied); its hash tags every report.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "cfair_out";

  // dataset
  std::string dataset_path;
  std::string dataset_format = "table";  // table | compas
  std::optional<Schema> schema;
  std::string protected_column;
  std::string target_column;
  std::vector<std::string> features;  // empty: every column except protected and target

  // preprocess
  std::vector<std::string> outlier_columns;
  double outlier_lo = 2.5;
  double outlier_hi = 97.5;

  // propensity
  models::TrainConfig propensity_model;
  bool propensity_smote = false;
  int smote_neighbors = 5;
  std::vector<models::ModelKind> propensity_candidates;
  double clamp = propensity::kDefaultClamp;

  // caliper
  double percentile = 90.0;
  std::optional<double> delta;
  std::size_t pair_budget = propensity::kDefaultPairBudget;

  metric::LearnConfig metric;

  // matching
  matching::MatchOrder order = matching::MatchOrder::dissimilarity;
  stats::TTestFlavor balance_test = stats::TTestFlavor::welch;

  // audit
  models::TrainConfig outcome_model;
  std::vector<std::string> outcome_features;  // empty: same as features
  int folds = 5;
  bool rematch_per_fold = false;
  int positive_class = 1;

  synth::SynthConfig synth;
  FoldnormConfig foldnorm;

  std::string canonical;
  std::string hash() const;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<double> percentile;
  std::optional<bool> psd;
  bool rematch_per_fold = false;
};

/// Throws ConfigError on malformed or unknown keys and when no seed is given.
RunConfig parse_run_config(std::string_view json_text, const Overrides& overrides = {});
RunConfig load_run_config(const std::string& path, const Overrides& overrides = {});

// Stages, exposed for tests.

struct Prepared {
  Table raw;
  PreprocessResult pre;
  GroupSplit split;
  models::EncodedFeatures features;          // every row of pre.table
  models::EncodedFeatures outcome_features;  // every row of pre.table
  std::vector<int> y;
  std::vector<int> membership;
  std::vector<std::string> class_names;
};

Prepared prepare(const RunConfig& config);

struct PropensityStage {
  models::Classifier model;
  propensity::PropensityScores s0, s1;
};

/// Trains on `train_rows` (all rows when empty) and scores the g0/g1 members
/// listed in `score0` / `score1` (table rows).
PropensityStage fit_propensity(const RunConfig& config, const Prepared& data, const std::vector<std::size_t>& train_rows,
                               const std::vector<std::size_t>& score0, const std::vector<std::size_t>& score1,
                               std::uint64_t seed);

struct MatchStage {
  double delta = 0.0;
  propensity::CandidateSet candidates;
  matching::DeltaGroups groups;
  metric::LearnResult learned;
  matching::CounterpartPairs pairs;
};

/// Caliper, metric learning on the delta-elements, then greedy matching.
/// Positions in the result refer to rows of x0 / x1.
MatchStage match_groups(const RunConfig& config, const Eigen::MatrixXd& x0, const Eigen::MatrixXd& x1,
                        const propensity::PropensityScores& s0, const propensity::PropensityScores& s1,
                        std::uint64_t seed);

/// Runs one subcommand, writing artifacts under config.output_dir. Throws
/// cfair::Error subclasses on failure.
void run_pipeline(Command command, const RunConfig& config);

/// Parses, runs and converts failures into an exit code plus error.json.
int run_main(Command command, const std::string& config_path, const Overrides& overrides, std::ostream& log);

}  // namespace cfair::cli
