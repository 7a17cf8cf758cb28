#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cfair_tools/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Counterpart fairness audit: propensity caliper, learned metric matching, fairness gaps"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> percentile;
  bool psd = false, no_psd = false, rematch = false;

  for (auto c : {cfair::cli::Command::ingest, cfair::cli::Command::propensity, cfair::cli::Command::match,
                 cfair::cli::Command::audit, cfair::cli::Command::synth, cfair::cli::Command::foldnorm}) {
    const char* help = "";
    switch (c) {
      case cfair::cli::Command::ingest: help = "Load, validate and preprocess the dataset"; break;
      case cfair::cli::Command::propensity: help = "Fit the propensity model and score both groups"; break;
      case cfair::cli::Command::match: help = "Learn the metric and select 1-1 counterparts"; break;
      case cfair::cli::Command::audit: help = "Cross-validated fairness report over counterpart slices"; break;
      case cfair::cli::Command::synth: help = "Run the two-Gaussian post-processing experiment"; break;
      case cfair::cli::Command::foldnorm: help = "Tabulate the folded-normal model of the DP-gap estimator"; break;
    }
    auto* sub = app.add_subcommand(cfair::cli::to_string(c), help);
    sub->add_option("--config", config_path, "Run configuration JSON")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Top-level seed (overrides the config)");
    sub->add_option("--out", out, "Output directory (overrides the config)");
    sub->add_option("--percentile", percentile, "Caliper percentile of |delta s|")->check(CLI::Range(0.0, 100.0));
    sub->add_flag("--psd", psd, "Project the metric onto the PSD cone after each step");
    sub->add_flag("--no-psd", no_psd, "Disable the PSD projection");
    sub->add_flag("--rematch-per-fold", rematch, "Recompute counterparts inside every audit fold");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (psd && no_psd) {
    std::cerr << "cfair: --psd and --no-psd are mutually exclusive\n";
    return 2;
  }

  cfair::cli::Overrides overrides;
  overrides.seed = seed;
  overrides.output_dir = out;
  overrides.percentile = percentile;
  if (psd) overrides.psd = true;
  if (no_psd) overrides.psd = false;
  overrides.rematch_per_fold = rematch;

  const auto* sub = app.get_subcommands().front();
  return cfair::cli::run_main(cfair::cli::command_from_string(sub->get_name()), config_path, overrides, std::cerr);
}
