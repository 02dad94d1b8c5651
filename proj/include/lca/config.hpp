#ifndef LCA_CONFIG_HPP
#define LCA_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lca/engine.hpp"
#include "lca/optimizer.hpp"
#include "lca/synth.hpp"

namespace lca::config {

struct DatasetConfig {
  enum class Kind { MnistIdx, Synthetic };
  enum class Generator { Clusters, Digits };

  Kind kind = Kind::Synthetic;
  // mnist_idx (paths resolved against $LCA_DATA_ROOT when relative)
  std::string images;
  std::string labels;
  std::optional<std::size_t> subset_size;
  std::uint64_t subset_seed = 0;
  // synthetic
  Generator generator = Generator::Clusters;
  synth::ClusterSpec clusters;
  std::size_t digits_examples = 12000;
  std::uint64_t digits_seed = 0;

  Dataset load() const;
};

struct LcaConfig {
  double tol = 1e-3;
  int max_depth = 6;
  bool first_order = false;
  bool per_class = false;
  std::string aggregate = "layer";  // "layer" or "none"
  bool grad_signs = false;
};

struct AnalysisConfig {
  double zero_tol = 0.0;
  std::size_t histogram_bins = 20;
  std::size_t top_k_peaks = 20;
  int shift_range = 2;
  std::size_t sync_trials = 10000;
  double sync_threshold = 1.0;
  double sigma_cutoff = 2.0;
  int specialization_top_k = 1;
  double specialization_threshold = 0.8;
  std::size_t fanio_baseline_nodes = 50;
  std::uint64_t seed = 1;
  bool help = true;
  bool layers = true;
  bool oscillations = true;
  bool tails = true;
  bool sync = true;
  bool specialization = true;
  bool fanio = true;
};

struct RunConfig {
  DatasetConfig dataset;
  std::vector<std::size_t> arch;  // hidden widths + output; input width from data
  optim::OptimConfig optimizer;
  std::size_t iterations = 880;
  std::size_t full_loss_every = 20;  // periodic full-set loss logging
  LcaConfig lca;
  AnalysisConfig analysis;
  std::string out_dir = "runs/run";
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  // Strict parse: unknown keys anywhere are rejected.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::string& path);
  // CRC64 of the canonical serialization, as 16 hex digits.
  std::string config_hash() const;
};

}  // namespace lca::config

#endif
