#include "lca/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lca/errors.hpp"

namespace lca::optim {

void OptimConfig::validate(const LayerLayout& layout) const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("momentum must be in [0,1)");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  for (const auto& [name, ov] : per_layer) {
    if (!layout.has_group(name)) {
      throw ConfigError("per-layer override names unknown layer: " + name);
    }
    if (ov.lr_scale < 0.0) throw ConfigError("lr_scale must be >= 0");
    if (ov.momentum_override &&
        (*ov.momentum_override < 0.0 || *ov.momentum_override >= 1.0)) {
      throw ConfigError("momentum override must be in [0,1)");
    }
    if (ov.freeze_from_iter && *ov.freeze_from_iter < 0) {
      throw ConfigError("freeze_from_iter must be >= 0");
    }
  }
}

nlohmann::json OptimConfig::to_json() const {
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [name, ov] : per_layer) {
    nlohmann::json o{{"lr_scale", ov.lr_scale}, {"frozen", ov.frozen}};
    if (ov.freeze_from_iter) o["freeze_from_iter"] = *ov.freeze_from_iter;
    if (ov.momentum_override) o["momentum_override"] = *ov.momentum_override;
    overrides[name] = std::move(o);
  }
  return {{"kind", kind == OptimKind::Sgd ? "sgd" : "adam"},
          {"lr", lr},
          {"momentum", momentum},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_eps", adam_eps},
          {"batch_size", batch_size},
          {"per_layer", overrides}};
}

OptimConfig OptimConfig::from_json(const nlohmann::json& j) {
  OptimConfig cfg;
  const std::string kind = j.value("kind", "sgd");
  if (kind == "sgd") {
    cfg.kind = OptimKind::Sgd;
  } else if (kind == "adam") {
    cfg.kind = OptimKind::Adam;
  } else {
    throw ConfigError("optimizer kind must be sgd or adam");
  }
  cfg.lr = j.value("lr", cfg.lr);
  cfg.momentum = j.value("momentum", cfg.momentum);
  cfg.adam_beta1 = j.value("adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = j.value("adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = j.value("adam_eps", cfg.adam_eps);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  if (j.contains("per_layer")) {
    for (const auto& [name, o] : j.at("per_layer").items()) {
      PerLayerOverride ov;
      ov.lr_scale = o.value("lr_scale", 1.0);
      ov.frozen = o.value("frozen", false);
      if (o.contains("freeze_from_iter")) {
        ov.freeze_from_iter = o.at("freeze_from_iter").get<long>();
      }
      if (o.contains("momentum_override")) {
        ov.momentum_override = o.at("momentum_override").get<double>();
      }
      cfg.per_layer[name] = ov;
    }
  }
  return cfg;
}

OptimState OptimState::init(const LayerLayout& layout, const OptimConfig& cfg) {
  OptimState st;
  st.velocity.assign(layout.param_count(), 0.0);
  if (cfg.kind == OptimKind::Adam) {
    st.second_moment.assign(layout.param_count(), 0.0);
  }
  return st;
}

double momentum_from_delay(double delay) {
  if (delay < 0.0) throw ConfigError("delay must be non-negative");
  return delay / (delay + 1.0);
}

namespace {

struct ResolvedOverride {
  double lr_scale = 1.0;
  bool frozen = false;
  double momentum = 0.0;
};

ResolvedOverride resolve(const OptimConfig& cfg, const LayerLayout& layout,
                         std::size_t group, long iteration) {
  ResolvedOverride r;
  r.momentum = cfg.kind == OptimKind::Sgd ? cfg.momentum : cfg.adam_beta1;
  const auto it = cfg.per_layer.find(layout.group_name(group));
  if (it != cfg.per_layer.end()) {
    const PerLayerOverride& ov = it->second;
    r.lr_scale = ov.lr_scale;
    r.frozen = ov.frozen ||
               (ov.freeze_from_iter && iteration >= *ov.freeze_from_iter);
    if (ov.momentum_override) r.momentum = *ov.momentum_override;
  }
  return r;
}

}  // namespace

void step(const LayerLayout& layout, std::span<double> theta, OptimState& state,
          std::span<const double> minibatch_grad, const OptimConfig& cfg,
          long iteration) {
  if (theta.size() != layout.param_count() ||
      minibatch_grad.size() != layout.param_count()) {
    throw std::invalid_argument("theta/grad length mismatch");
  }
  state.step_count += 1;
  const long t = state.step_count;

  for (const auto& e : layout.entries()) {
    const ResolvedOverride ov = resolve(cfg, layout, e.group, iteration);
    const std::size_t begin = e.offset;
    const std::size_t end = e.offset + e.size();
    if (ov.frozen) {
      std::fill(state.velocity.begin() + begin, state.velocity.begin() + end, 0.0);
      if (!state.second_moment.empty()) {
        std::fill(state.second_moment.begin() + begin,
                  state.second_moment.begin() + end, 0.0);
      }
      continue;
    }
    const double lr = cfg.lr * ov.lr_scale;
    if (cfg.kind == OptimKind::Sgd) {
      const double m = ov.momentum;
      for (std::size_t i = begin; i < end; ++i) {
        const double v = m * state.velocity[i] + minibatch_grad[i];
        state.velocity[i] = v;
        theta[i] -= lr * v;
      }
    } else {
      const double b1 = ov.momentum;
      const double b2 = cfg.adam_beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
      for (std::size_t i = begin; i < end; ++i) {
        const double g = minibatch_grad[i];
        const double m1 = b1 * state.velocity[i] + (1.0 - b1) * g;
        const double m2 = b2 * state.second_moment[i] + (1.0 - b2) * g * g;
        state.velocity[i] = m1;
        state.second_moment[i] = m2;
        theta[i] -= lr * (m1 / c1) / (std::sqrt(m2 / c2) + cfg.adam_eps);
      }
    }
    for (std::size_t i = begin; i < end; ++i) {
      if (!std::isfinite(theta[i])) {
        throw NumericError("non-finite parameter in layer " + e.name +
                           " at iteration " + std::to_string(iteration));
      }
    }
  }
}

MinibatchSampler::MinibatchSampler(std::size_t num_examples,
                                   std::size_t batch_size, std::uint64_t seed)
    : n_(num_examples), batch_size_(batch_size), rng_(seed) {
  if (batch_size_ == 0) throw ConfigError("batch_size must be positive");
  if (batch_size_ > n_) throw ConfigError("batch_size exceeds dataset size");
  order_.resize(n_);
  std::iota(order_.begin(), order_.end(), 0);
  reshuffle();
}

void MinibatchSampler::reshuffle() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

std::vector<int> MinibatchSampler::next() {
  if (cursor_ >= n_) reshuffle();
  const std::size_t take = std::min(batch_size_, n_ - cursor_);
  std::vector<int> batch(order_.begin() + cursor_, order_.begin() + cursor_ + take);
  cursor_ += take;
  return batch;
}

}  // namespace lca::optim
