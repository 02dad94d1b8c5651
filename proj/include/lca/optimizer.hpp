#ifndef LCA_OPTIMIZER_HPP
#define LCA_OPTIMIZER_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lca/layout.hpp"

namespace lca::optim {

enum class OptimKind { Sgd, Adam };

struct PerLayerOverride {
  double lr_scale = 1.0;
  bool frozen = false;
  // Freeze the layer from this iteration onward (for freeze-at-argmin runs).
  std::optional<long> freeze_from_iter;
  // Replaces the global momentum (SGD) or beta1 (Adam) for this layer.
  std::optional<double> momentum_override;
};

struct OptimConfig {
  OptimKind kind = OptimKind::Sgd;
  double lr = 0.05;
  double momentum = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 256;
  std::map<std::string, PerLayerOverride> per_layer;  // keyed by group name

  void validate(const LayerLayout& layout) const;
  nlohmann::json to_json() const;
  static OptimConfig from_json(const nlohmann::json& j);
};

struct OptimState {
  std::vector<double> velocity;       // SGD velocity / Adam first moment
  std::vector<double> second_moment;  // Adam only
  long step_count = 0;

  static OptimState init(const LayerLayout& layout, const OptimConfig& cfg);
};

// Momentum giving an information delay of `delay` steps: delay / (delay + 1).
double momentum_from_delay(double delay);

// One optimizer update, in place. `iteration` is used both for
// freeze_from_iter and for error context. Frozen layers are left bitwise
// untouched and their buffers zeroed.
void step(const LayerLayout& layout, std::span<double> theta, OptimState& state,
          std::span<const double> minibatch_grad, const OptimConfig& cfg,
          long iteration);

// Without-replacement mini-batches: each epoch is a fresh shuffled
// permutation cut into batches, the final one possibly short. Deterministic
// for a fixed seed.
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t num_examples, std::size_t batch_size,
                   std::uint64_t seed);

  std::vector<int> next();

 private:
  void reshuffle();

  std::size_t n_;
  std::size_t batch_size_;
  std::vector<int> order_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace lca::optim

#endif
