#include "lca/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "lca/crc64.hpp"
#include "lca/errors.hpp"

namespace lca::engine {
namespace {

constexpr std::uint16_t kLcamVersion = 1;

// Composite Simpson node weight numerators over 2^depth panels: endpoints 1,
// odd nodes 4, even interior nodes 2; the common denominator is 6 * 2^depth.
int node_coeff(std::size_t j, std::size_t last) {
  if (j == 0 || j == last) return 1;
  return (j % 2 == 1) ? 4 : 2;
}

struct NodeEval {
  double loss = 0.0;
  std::vector<double> grad;
  std::vector<double> class_grads;  // C x K when per-class is on
};

class Integrator {
 public:
  Integrator(const LossModel& model, const LayerLayout& layout,
             const LcaOptions& opts)
      : model_(model), layout_(layout), opts_(opts) {
    k_ = model.param_count();
    if (layout.param_count() != k_) {
      throw std::invalid_argument("layout does not match model parameters");
    }
    if (opts_.per_class) {
      c_ = model.class_count();
      if (c_ == 0) {
        throw ConfigError("per-class LCA requested for a classless model");
      }
      group_of_.resize(k_);
      neuron_of_.resize(k_);
      for (std::size_t i = 0; i < k_; ++i) {
        group_of_[i] = layout.group_of_index(i);
        neuron_of_[i] = layout.neuron_of_index(i);
      }
    }
  }

  LcaResult run(const traj::TrajectoryReader& traj);

 private:
  NodeEval evaluate(std::span<const double> theta) const;

  const LossModel& model_;
  const LayerLayout& layout_;
  LcaOptions opts_;
  std::size_t k_ = 0;
  std::size_t c_ = 0;
  std::vector<std::size_t> group_of_;
  std::vector<std::size_t> neuron_of_;
};

NodeEval Integrator::evaluate(std::span<const double> theta) const {
  NodeEval node;
  node.grad.resize(k_);
  if (opts_.per_class) {
    node.class_grads.resize(c_ * k_);
    node.loss = model_.class_gradients(theta, node.class_grads, node.grad);
  } else {
    node.loss = model_.gradient(theta, node.grad);
  }
  return node;
}

LcaResult Integrator::run(const traj::TrajectoryReader& traj) {
  const std::size_t t_count = traj.iterations();
  if (traj.param_count() != k_) {
    throw std::invalid_argument("trajectory K does not match model");
  }

  LcaResult result;
  LcaMatrix& m = result.matrix;
  m.iterations = t_count;
  m.param_count = k_;
  m.tol = opts_.tol;
  m.values.resize(t_count * k_);
  m.iter_error.resize(t_count);
  m.depth.resize(t_count);
  m.loss.resize(t_count + 1);

  const std::size_t groups = layout_.group_count();
  if (opts_.per_class) {
    ClassLcaTensor tensor;
    tensor.classes = c_;
    tensor.iterations = t_count;
    tensor.aggregate = opts_.aggregate;
    tensor.columns = opts_.aggregate == ClassAggregate::Layer ? groups : k_;
    tensor.values.assign(c_ * t_count * tensor.columns, 0.0);
    result.per_class = std::move(tensor);

    NeuronClassHelped helped;
    helped.classes = c_;
    helped.neurons = layout_.neuron_count();
    helped.helped.assign(c_ * helped.neurons, 0.0);
    for (std::size_t g = 0; g <= groups; ++g) {
      helped.neuron_base.push_back(g < groups ? layout_.neuron_base(g)
                                              : layout_.neuron_count());
    }
    result.neuron_helped = std::move(helped);
  }
  if (opts_.record_grad_signs) {
    GradSigns gs;
    gs.rows = t_count + 1;
    gs.cols = k_;
    gs.signs.assign(gs.rows * k_, 0);
    result.grad_signs = std::move(gs);
  }

  const int max_depth = opts_.first_order ? 0 : opts_.max_depth;
  const std::size_t finest = std::size_t{1} << (max_depth + 1);

  // Node cache for the current segment, keyed by position at the finest
  // dyadic resolution. Slot `finest` (the right endpoint) carries over as
  // slot 0 of the next iteration, so each iterate is evaluated exactly once.
  std::vector<std::unique_ptr<NodeEval>> nodes(finest + 1);
  std::vector<double> theta_a;
  std::vector<double> theta_b = traj.snapshot(0);
  nodes[finest] = std::make_unique<NodeEval>(evaluate(theta_b));

  std::vector<double> dtheta(k_), effective(k_), row(k_), class_eff(k_);
  double total_alloc = 0.0;

  for (std::size_t t = 0; t < t_count; ++t) {
    theta_a = std::move(theta_b);
    theta_b = traj.snapshot(t + 1);
    std::unique_ptr<NodeEval> left = std::move(nodes[finest]);
    std::fill(nodes.begin(), nodes.end(), nullptr);
    nodes[0] = std::move(left);

    for (std::size_t i = 0; i < k_; ++i) dtheta[i] = theta_b[i] - theta_a[i];

    bool segment_zero = true;
    for (std::size_t i = 0; i < k_; ++i) {
      if (dtheta[i] != 0.0) {
        segment_zero = false;
        break;
      }
    }

    auto node_at = [&](std::size_t pos) -> NodeEval& {
      if (!nodes[pos]) {
        if (segment_zero) {
          // all evaluation points coincide with the left endpoint
          nodes[pos] = std::make_unique<NodeEval>(*nodes[0]);
        } else if (pos == finest) {
          nodes[pos] = std::make_unique<NodeEval>(evaluate(theta_b));
        } else {
          const double s =
              static_cast<double>(pos) / static_cast<double>(finest);
          std::vector<double> theta_s(k_);
          for (std::size_t i = 0; i < k_; ++i) {
            theta_s[i] = theta_a[i] + s * dtheta[i];
          }
          try {
            nodes[pos] = std::make_unique<NodeEval>(evaluate(theta_s));
          } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (iteration " +
                               std::to_string(t) + ")");
          }
        }
      }
      return *nodes[pos];
    };

    const double loss_a = node_at(0).loss;
    const double loss_b = node_at(finest).loss;
    const double delta_loss = loss_b - loss_a;
    m.loss[t] = loss_a;
    m.loss[t + 1] = loss_b;

    int depth_used = 0;
    double eps = 0.0;
    for (int depth = 0;; ++depth) {
      const std::size_t last = std::size_t{1} << (depth + 1);
      const std::size_t stride = finest / last;
      const double denom = 6.0 * static_cast<double>(std::size_t{1} << depth);

      if (opts_.first_order) {
        const double* g = node_at(0).grad.data();
        for (std::size_t i = 0; i < k_; ++i) effective[i] = g[i];
      } else {
        std::fill(effective.begin(), effective.end(), 0.0);
        for (std::size_t j = 0; j <= last; ++j) {
          const double cj = node_coeff(j, last);
          const double* g = node_at(j * stride).grad.data();
          for (std::size_t i = 0; i < k_; ++i) effective[i] += cj * g[i];
        }
        for (std::size_t i = 0; i < k_; ++i) effective[i] /= denom;
      }

      double row_sum = 0.0;
      for (std::size_t i = 0; i < k_; ++i) {
        row[i] = effective[i] * dtheta[i];
        row_sum += row[i];
      }
      eps = delta_loss - row_sum;
      depth_used = depth;
      if (opts_.first_order || std::abs(eps) < opts_.tol || depth >= max_depth) {
        break;
      }
    }

    std::memcpy(m.values.data() + t * k_, row.data(), k_ * sizeof(double));
    m.iter_error[t] = eps;
    m.depth[t] = static_cast<std::uint8_t>(depth_used);
    for (std::size_t i = 0; i < k_; ++i) total_alloc += row[i];

    if (opts_.per_class) {
      ClassLcaTensor& tensor = *result.per_class;
      NeuronClassHelped& helped = *result.neuron_helped;
      const std::size_t last = std::size_t{1} << (depth_used + 1);
      const std::size_t stride = finest / last;
      const double denom = 6.0 * static_cast<double>(std::size_t{1} << depth_used);
      for (std::size_t c = 0; c < c_; ++c) {
        std::fill(class_eff.begin(), class_eff.end(), 0.0);
        for (std::size_t j = 0; j <= last; ++j) {
          const double cj = node_coeff(j, last);
          const double* g = node_at(j * stride).class_grads.data() + c * k_;
          for (std::size_t i = 0; i < k_; ++i) class_eff[i] += cj * g[i];
        }
        double* out = tensor.values.data() + (c * t_count + t) * tensor.columns;
        double* helped_row = helped.helped.data() + c * helped.neurons;
        for (std::size_t i = 0; i < k_; ++i) {
          const double a = (class_eff[i] / denom) * dtheta[i];
          if (tensor.aggregate == ClassAggregate::Layer) {
            out[group_of_[i]] += a;
          } else {
            out[i] = a;
          }
          if (a < 0.0) helped_row[neuron_of_[i]] -= a;
        }
      }
    }

    if (opts_.record_grad_signs) {
      GradSigns& gs = *result.grad_signs;
      const double* g = node_at(0).grad.data();
      std::int8_t* out = gs.signs.data() + t * k_;
      for (std::size_t i = 0; i < k_; ++i) {
        out[i] = g[i] > 0.0 ? 1 : (g[i] < 0.0 ? -1 : 0);
      }
      if (t + 1 == t_count) {
        const double* gl = node_at(finest).grad.data();
        std::int8_t* last_row = gs.signs.data() + t_count * k_;
        for (std::size_t i = 0; i < k_; ++i) {
          last_row[i] = gl[i] > 0.0 ? 1 : (gl[i] < 0.0 ? -1 : 0);
        }
      }
    }

    if (opts_.progress) opts_.progress(t + 1, t_count);
  }

  m.total_allocated = total_alloc;
  m.loss_change = m.loss[t_count] - m.loss[0];
  if (m.loss_change != 0.0) {
    m.cumulative_error_pct =
        100.0 * (total_alloc - m.loss_change) / std::abs(m.loss_change);
  } else {
    m.cumulative_error_pct = total_alloc == 0.0 ? 0.0 : INFINITY;
  }

  if (opts_.enforce_gate && !opts_.first_order) check_gate(m);
  return result;
}

}  // namespace

bool LcaMatrix::flagged(std::size_t t) const {
  return std::abs(iter_error[t]) >= tol;
}

std::vector<double> lca_first_order(std::span<const double> grad,
                                    std::span<const double> dtheta) {
  if (grad.size() != dtheta.size()) {
    throw std::invalid_argument("gradient/delta length mismatch");
  }
  std::vector<double> out(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) out[i] = grad[i] * dtheta[i];
  return out;
}

std::vector<double> simpson_gradient(const LossModel& model,
                                     std::span<const double> theta_a,
                                     std::span<const double> theta_b) {
  const std::size_t k = model.param_count();
  if (theta_a.size() != k || theta_b.size() != k) {
    throw std::invalid_argument("theta length mismatch");
  }
  std::vector<double> g_a(k);
  model.gradient(theta_a, g_a);
  if (std::equal(theta_a.begin(), theta_a.end(), theta_b.begin())) {
    return g_a;  // all three evaluation points coincide
  }
  std::vector<double> mid(k);
  for (std::size_t i = 0; i < k; ++i) mid[i] = theta_a[i] + 0.5 * (theta_b[i] - theta_a[i]);
  std::vector<double> g_m(k), g_b(k);
  model.gradient(mid, g_m);
  model.gradient(theta_b, g_b);
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    out[i] = (g_a[i] + 4.0 * g_m[i] + g_b[i]) / 6.0;
  }
  return out;
}

StepResult adaptive_lca_step(const LossModel& model,
                             std::span<const double> theta_a,
                             std::span<const double> theta_b, double tol,
                             int max_depth) {
  const std::size_t k = model.param_count();
  const std::size_t finest = std::size_t{1} << (max_depth + 1);
  const bool same = std::equal(theta_a.begin(), theta_a.end(), theta_b.begin());
  std::vector<std::unique_ptr<std::pair<double, std::vector<double>>>> nodes(
      finest + 1);
  auto eval_at = [&](std::size_t pos) -> std::pair<double, std::vector<double>>& {
    if (!nodes[pos]) {
      std::vector<double> theta(k);
      const double s = static_cast<double>(pos) / static_cast<double>(finest);
      for (std::size_t i = 0; i < k; ++i) {
        theta[i] = same || pos == 0
                       ? theta_a[i]
                       : (pos == finest ? theta_b[i]
                                        : theta_a[i] + s * (theta_b[i] - theta_a[i]));
      }
      auto node = std::make_unique<std::pair<double, std::vector<double>>>();
      node->second.resize(k);
      node->first = model.gradient(theta, node->second);
      nodes[pos] = std::move(node);
    }
    return *nodes[pos];
  };

  StepResult res;
  res.loss_a = eval_at(0).first;
  res.loss_b = eval_at(finest).first;
  const double delta_loss = res.loss_b - res.loss_a;
  std::vector<double> effective(k);
  for (int depth = 0;; ++depth) {
    const std::size_t last = std::size_t{1} << (depth + 1);
    const std::size_t stride = finest / last;
    const double denom = 6.0 * static_cast<double>(std::size_t{1} << depth);
    std::fill(effective.begin(), effective.end(), 0.0);
    for (std::size_t j = 0; j <= last; ++j) {
      const double cj = node_coeff(j, last);
      const auto& g = eval_at(j * stride).second;
      for (std::size_t i = 0; i < k; ++i) effective[i] += cj * g[i];
    }
    res.row.assign(k, 0.0);
    double row_sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      res.row[i] = (effective[i] / denom) * (theta_b[i] - theta_a[i]);
      row_sum += res.row[i];
    }
    res.epsilon = delta_loss - row_sum;
    res.depth = depth;
    if (std::abs(res.epsilon) < tol || depth >= max_depth) break;
  }
  return res;
}

LcaResult compute_lca(const LossModel& model, const LayerLayout& layout,
                      const traj::TrajectoryReader& traj,
                      const LcaOptions& opts) {
  Integrator integrator(model, layout, opts);
  return integrator.run(traj);
}

void check_gate(const LcaMatrix& matrix) {
  if (std::abs(matrix.cumulative_error_pct) < 1.0) return;
  std::vector<std::size_t> order(matrix.iterations);
  for (std::size_t t = 0; t < matrix.iterations; ++t) order[t] = t;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(matrix.iter_error[a]) > std::abs(matrix.iter_error[b]);
  });
  std::ostringstream msg;
  msg << "cumulative LCA error " << matrix.cumulative_error_pct
      << "% breaches the 1% gate; worst iterations:";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, order.size()); ++i) {
    msg << " t=" << order[i] << " (eps=" << matrix.iter_error[order[i]] << ")";
  }
  throw GateError(msg.str());
}

}  // namespace lca::engine
