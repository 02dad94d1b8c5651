#ifndef LCA_EXPERIMENT_HPP
#define LCA_EXPERIMENT_HPP

#include <string>
#include <vector>

#include "lca/config.hpp"

namespace lca::experiment {

inline const std::vector<std::string> kPresets = {
    "baseline",        "freeze-first", "freeze-last", "freeze-at-argmin",
    "lr10x-last",      "delay-sweep",  "hyperparam-sweep"};

struct ExperimentOptions {
  std::string preset = "baseline";
  std::size_t runs = 5;            // seeds per arm
  std::uint64_t base_seed = 1;
  bool keep_artifacts = false;     // keep per-run trajectories/matrices
  std::string out_dir = "experiments/exp";
};

struct ArmResult {
  std::string name;
  double knob = 0.0;  // delay value / scale factor, preset-dependent
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> layer_totals;  // run x layer
  std::vector<double> final_loss;
  std::vector<double> pct_helped;  // zeros excluded
  std::vector<bool> gate_failed;
};

struct ExperimentResult {
  std::vector<std::string> layer_names;
  std::vector<ArmResult> arms;
  std::string comparison_csv;
  std::string comparison_json;
};

// Runs `runs` seeds for every arm of the preset on top of the base config,
// aggregates layer totals / final losses / helping percentages, and emits a
// comparison table. Arms that breach the LCA gate are marked and excluded
// from aggregation but the table is still written.
ExperimentResult run_experiment(const config::RunConfig& base,
                                const ExperimentOptions& opts);

}  // namespace lca::experiment

#endif
