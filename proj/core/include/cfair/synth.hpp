#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfair/models.hpp"
#include "cfair/tabular.hpp"

namespace cfair::synth {

struct Gaussian2 {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
};

struct SynthConfig {
  Gaussian2 g0_main{{-3.0, 1.5}, (Eigen::Matrix2d() << 0.3, 0.2, 0.2, 0.3).finished()};
  Gaussian2 shared{{-1.0, 1.5}, (Eigen::Matrix2d() << 0.1, 0.05, 0.05, 0.1).finished()};
  Gaussian2 g1_main{{2.5, 2.5}, (Eigen::Matrix2d() << 1.0, 0.3, 0.3, 1.0).finished()};
  int n_g0_main = 100;
  int n_g1_main = 1000;
  int n_pairs = 50;
  /// Variance of the isotropic noise added to shared points to form their G0 counterparts.
  double noise_variance = 0.01;
  // A sample is positive when x2 - x1 - threshold > 0.
  double label_offset_g0_main = 4.5;
  double label_offset_shared = 2.5;
  double label_offset_g1_main = 0.0;
  double decision_threshold = 0.5;
  /// G0 decision threshold after post-processing.
  double shifted_threshold = 0.85;
  int repeats = 100;
  std::uint64_t seed = 0;
  models::TrainConfig classifier{.kind = models::ModelKind::logistic, .learning_rate = 0.1, .iterations = 10000,
                                 .tolerance = 1e-8};
  /// Worker threads for repeats; 0 uses the hardware concurrency.
  int threads = 0;

  void validate() const;
};

std::string to_json(const SynthConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
SynthConfig synth_config_from_json(std::string_view text);

/// Rows: G0 main, G0 counterparts, G1 main, G1 shared.
struct SynthDataset {
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::vector<int> group;    // 0 = G0, 1 = G1
  std::vector<int> pair_id;  // -1 outside the ground-truth pairs
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (G0 row, G1 row)

  std::size_t n_rows() const noexcept { return y.size(); }
  std::vector<std::size_t> rows_of_group(int g) const;
  /// Columns x1, x2, group, label.
  Table to_table() const;
  void write_csv(std::ostream& out) const;
};

SynthDataset generate_synthetic(const SynthConfig& config, std::uint64_t seed);

/// Draws n samples; throws ConfigError unless cov is symmetric positive definite.
Eigen::MatrixXd sample_gaussian(const Gaussian2& g, int n, std::mt19937_64& rng);

struct GapSet {
  double dp_before = 0.0;
  double cdp_before = 0.0;
  double dp_after = 0.0;
  double cdp_after = 0.0;
};

struct RepeatResult {
  int repeat = 0;
  std::uint64_t seed = 0;
  /// Gaps of 0/1 decisions at the G0/G1 thresholds.
  GapSet thresholded;
  /// Gaps of predicted probabilities; post-processing leaves them unchanged.
  GapSet probability;
};

struct GapStat {
  double mean = 0.0;
  double stddev = 0.0;
};

struct GapSummary {
  GapStat dp_before, cdp_before, dp_after, cdp_after;
};

struct SynthSummary {
  SynthConfig config;
  std::vector<RepeatResult> repeats;
  GapSummary thresholded;
  GapSummary probability;
};

RepeatResult run_repeat(const SynthConfig& config, int repeat);
SynthSummary run_synthetic_experiment(const SynthConfig& config);
GapSummary summarize(const std::vector<GapSet>& gaps);

std::string to_json(const SynthSummary& summary);
/// repeat,seed,convention,dp_before,cdp_before,dp_after,cdp_after then mean/std rows.
void write_summary_csv(std::ostream& out, const SynthSummary& summary);

}  // namespace cfair::synth
