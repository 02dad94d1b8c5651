#ifndef LCA_PIPELINE_HPP
#define LCA_PIPELINE_HPP

#include <optional>
#include <string>

#include "lca/analysis.hpp"
#include "lca/config.hpp"
#include "lca/engine.hpp"

namespace lca::pipeline {

// Artifact names inside a run directory.
inline constexpr const char* kTrajectoryFile = "trajectory.lcat";
inline constexpr const char* kLcamFile = "lca.lcam";
inline constexpr const char* kClassTensorFile = "class_lca.json";
inline constexpr const char* kNeuronHelpedFile = "neuron_helped.json";
inline constexpr const char* kGradSignsFile = "grad_signs.lcgs";

struct TrainResult {
  std::string trajectory_path;
  double final_full_loss = 0.0;
  std::size_t iterations = 0;
};

// Runs the optimizer loop, streaming snapshots and batch indices into
// out_dir/trajectory.lcat and per-iteration losses into train_log.csv.
TrainResult train(const config::RunConfig& cfg);

struct LcaRunResult {
  std::string lcam_path;
  double cumulative_error_pct = 0.0;
  std::size_t flagged_iterations = 0;
  std::vector<std::size_t> depth_histogram;
  bool gate_passed = true;
};

// Integrates the trajectory, writes lca.lcam (+ per-class / gradient-sign
// sidecars per config) and an error report. Does not throw on a gate breach;
// callers inspect gate_passed.
LcaRunResult lca(const config::RunConfig& cfg,
                 const std::string& trajectory_path = "");

struct AnalyzeResult {
  std::string summary_path;
  analysis::HelpStats help;
  analysis::LayerTotals layers;
  std::optional<analysis::OscillationStats> oscillations;
  std::optional<analysis::SyncReport> sync;          // per-class when available
  std::optional<analysis::SyncReport> sync_layers;   // aggregate across layers
};

// Computes every enabled statistic from the artifacts in cfg.out_dir and
// emits CSV series plus analysis/summary.json.
AnalyzeResult analyze(const config::RunConfig& cfg,
                      const std::string& lcam_path = "",
                      const std::string& trajectory_path = "");

std::string run_id_of(const config::RunConfig& cfg);

}  // namespace lca::pipeline

#endif
