#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

#include "lca/errors.hpp"
#include "lca/nn.hpp"

namespace lca::nn {
namespace {

struct MlpView {
  std::size_t depth = 0;              // number of dense layers
  std::vector<std::size_t> widths;    // depth + 1
  std::vector<const double*> kernels;
  std::vector<const double*> biases;
};

MlpView view_of(const LayerLayout& layout, std::span<const double> theta) {
  if (layout.widths().empty()) {
    throw std::invalid_argument("layout does not describe a dense stack");
  }
  if (theta.size() != layout.param_count()) {
    throw std::invalid_argument("theta length does not match layout");
  }
  MlpView v;
  v.widths = layout.widths();
  v.depth = v.widths.size() - 1;
  for (const auto& e : layout.entries()) {
    if (e.kind == ParamKind::DenseKernel) {
      v.kernels.push_back(theta.data() + e.offset);
    } else {
      v.biases.push_back(theta.data() + e.offset);
    }
  }
  return v;
}

// Forward pass for one example; activations z[l]/h[l] sized widths[l+1].
// Returns the cross-entropy in nats. Softmax probabilities minus the one-hot
// target are left in dz_out when non-null (unnormalized per-example grad).
double example_forward(const MlpView& v, const float* x, int label,
                       std::vector<std::vector<double>>& z,
                       std::vector<std::vector<double>>& h,
                       double* dz_out) {
  for (std::size_t l = 0; l < v.depth; ++l) {
    const std::size_t in = v.widths[l];
    const std::size_t out = v.widths[l + 1];
    double* zl = z[l].data();
    std::memcpy(zl, v.biases[l], out * sizeof(double));
    if (l == 0) {
      for (std::size_t d = 0; d < in; ++d) {
        const double xd = x[d];
        if (xd == 0.0) continue;  // dead pixels contribute nothing
        const double* w = v.kernels[l] + d * out;
        for (std::size_t j = 0; j < out; ++j) zl[j] += xd * w[j];
      }
    } else {
      const double* hin = h[l - 1].data();
      for (std::size_t d = 0; d < in; ++d) {
        const double hd = hin[d];
        if (hd == 0.0) continue;  // ReLU zeros are common
        const double* w = v.kernels[l] + d * out;
        for (std::size_t j = 0; j < out; ++j) zl[j] += hd * w[j];
      }
    }
    if (l + 1 < v.depth) {
      double* hl = h[l].data();
      for (std::size_t j = 0; j < out; ++j) hl[j] = zl[j] > 0.0 ? zl[j] : 0.0;
    }
  }
  // softmax cross-entropy with max subtraction
  const std::size_t c_count = v.widths.back();
  const double* logits = z[v.depth - 1].data();
  double zmax = logits[0];
  for (std::size_t c = 1; c < c_count; ++c) zmax = std::max(zmax, logits[c]);
  double sum = 0.0;
  for (std::size_t c = 0; c < c_count; ++c) sum += std::exp(logits[c] - zmax);
  const double lse = zmax + std::log(sum);
  if (dz_out != nullptr) {
    for (std::size_t c = 0; c < c_count; ++c) {
      dz_out[c] = std::exp(logits[c] - lse);
    }
    dz_out[static_cast<std::size_t>(label)] -= 1.0;
  }
  return lse - logits[static_cast<std::size_t>(label)];
}

// Backward pass for one example, accumulating unnormalized gradients into
// acc (lays out kernels/biases exactly like theta). dz holds dL/dz per layer.
void example_backward(const MlpView& v, const LayerLayout& layout,
                      const float* x,
                      const std::vector<std::vector<double>>& z,
                      const std::vector<std::vector<double>>& h,
                      std::vector<std::vector<double>>& dz, double* acc) {
  const auto& entries = layout.entries();
  for (std::size_t l = v.depth; l-- > 0;) {
    const std::size_t in = v.widths[l];
    const std::size_t out = v.widths[l + 1];
    const double* dzl = dz[l].data();
    double* wacc = acc + entries[2 * l].offset;
    double* bacc = acc + entries[2 * l + 1].offset;
    for (std::size_t j = 0; j < out; ++j) bacc[j] += dzl[j];
    if (l == 0) {
      for (std::size_t d = 0; d < in; ++d) {
        const double xd = x[d];
        if (xd == 0.0) continue;
        double* wrow = wacc + d * out;
        for (std::size_t j = 0; j < out; ++j) wrow[j] += xd * dzl[j];
      }
    } else {
      const double* hin = h[l - 1].data();
      const double* zin = z[l - 1].data();
      double* dzin = dz[l - 1].data();
      const double* w = v.kernels[l];
      for (std::size_t d = 0; d < in; ++d) {
        const double hd = hin[d];
        if (hd != 0.0) {
          double* wrow = wacc + d * out;
          for (std::size_t j = 0; j < out; ++j) wrow[j] += hd * dzl[j];
        }
        if (zin[d] > 0.0) {
          const double* wrow = w + d * out;
          double s = 0.0;
          for (std::size_t j = 0; j < out; ++j) s += wrow[j] * dzl[j];
          dzin[d] = s;
        } else {
          dzin[d] = 0.0;
        }
      }
    }
  }
}

struct Workspace {
  std::vector<std::vector<double>> z, h, dz;
  std::vector<double> dz3;

  explicit Workspace(const MlpView& v) {
    for (std::size_t l = 0; l < v.depth; ++l) {
      z.emplace_back(v.widths[l + 1]);
      h.emplace_back(v.widths[l + 1]);
      dz.emplace_back(v.widths[l + 1]);
    }
  }
};

// Balanced in-place tree sum of per-shard buffers (stride doubling), then a
// final scale. Order is a function of the shard count only.
void tree_combine(std::vector<std::vector<double>>& bufs) {
  const std::size_t n = bufs.size();
  for (std::size_t step = 1; step < n; step *= 2) {
    for (std::size_t i = 0; i + step < n; i += 2 * step) {
      double* dst = bufs[i].data();
      const double* src = bufs[i + step].data();
      const std::size_t len = bufs[i].size();
      for (std::size_t k = 0; k < len; ++k) dst[k] += src[k];
    }
  }
}

double tree_combine_scalars(std::vector<double>& vals) {
  const std::size_t n = vals.size();
  for (std::size_t step = 1; step < n; step *= 2) {
    for (std::size_t i = 0; i + step < n; i += 2 * step) {
      vals[i] += vals[i + step];
    }
  }
  return vals.empty() ? 0.0 : vals[0];
}

// The one workhorse behind the public entry points. grad/class_grads may be
// empty spans when not requested.
double evaluate(const LayerLayout& layout, std::span<const double> theta,
                const Dataset& data, std::span<const int> subset,
                const ReductionPlan& plan, std::span<double> grad,
                std::span<double> class_grads) {
  const MlpView v = view_of(layout, theta);
  if (v.widths.front() != data.feature_dim) {
    throw std::invalid_argument("input width does not match dataset D");
  }
  const bool want_grad = !grad.empty() || !class_grads.empty();
  const bool per_class = !class_grads.empty();
  const std::size_t k_count = layout.param_count();
  const std::size_t c_count = data.num_classes;
  if (!grad.empty() && grad.size() != k_count) {
    throw std::invalid_argument("grad span has wrong length");
  }
  if (per_class && class_grads.size() != c_count * k_count) {
    throw std::invalid_argument("class_grads span has wrong length");
  }

  const std::size_t m = subset.empty() ? data.num_examples : subset.size();
  if (m == 0) throw std::invalid_argument("empty evaluation subset");
  for (int idx : subset) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= data.num_examples) {
      throw std::invalid_argument("subset index out of range");
    }
  }
  const std::size_t shard_size = std::max<std::size_t>(1, plan.shard_size);
  const std::size_t shards = (m + shard_size - 1) / shard_size;
  const std::size_t buf_len = per_class ? c_count * k_count : k_count;

  std::vector<std::vector<double>> shard_grads;
  if (want_grad) {
    shard_grads.assign(shards, {});
  }
  std::vector<double> shard_loss(shards, 0.0);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t begin = s * shard_size;
    const std::size_t end = std::min(m, begin + shard_size);
    Workspace ws(v);
    double* acc = nullptr;
    if (want_grad) {
      shard_grads[s].assign(buf_len, 0.0);
      acc = shard_grads[s].data();
    }
    double loss_sum = 0.0;
    for (std::size_t r = begin; r < end; ++r) {
      const std::size_t n =
          subset.empty() ? r : static_cast<std::size_t>(subset[r]);
      const float* x = data.row(n);
      const int y = data.labels[n];
      double* dz_last = want_grad ? ws.dz[v.depth - 1].data() : nullptr;
      loss_sum += example_forward(v, x, y, ws.z, ws.h, dz_last);
      if (want_grad) {
        double* target =
            per_class ? acc + static_cast<std::size_t>(y) * k_count : acc;
        example_backward(v, layout, x, ws.z, ws.h, ws.dz, target);
      }
    }
    shard_loss[s] = loss_sum;
  }

  const double inv_m = 1.0 / static_cast<double>(m);
  const double loss = tree_combine_scalars(shard_loss) * inv_m;
  if (!std::isfinite(loss)) {
    throw NumericError("non-finite loss in forward pass");
  }
  if (want_grad) {
    tree_combine(shard_grads);
    const double* total = shard_grads[0].data();
    if (per_class) {
      for (std::size_t i = 0; i < buf_len; ++i) class_grads[i] = total[i] * inv_m;
      if (!grad.empty()) {
        // total gradient as the class sum, fixed class order
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t c = 0; c < c_count; ++c) {
          const double* row = class_grads.data() + c * k_count;
          for (std::size_t i = 0; i < k_count; ++i) grad[i] += row[i];
        }
      }
    } else {
      for (std::size_t i = 0; i < k_count; ++i) grad[i] = total[i] * inv_m;
    }
    const std::span<const double> check = grad.empty() ? class_grads : grad;
    double norm = 0.0;
    for (double g : check) norm += g * g;
    if (!std::isfinite(norm)) {
      throw NumericError("non-finite gradient");
    }
  }
  return loss;
}

}  // namespace

std::vector<double> init_params(const LayerLayout& layout, std::uint64_t seed) {
  std::vector<double> theta(layout.param_count(), 0.0);
  std::mt19937_64 rng(seed);
  for (const auto& e : layout.entries()) {
    if (e.kind != ParamKind::DenseKernel) continue;  // biases stay zero
    std::normal_distribution<double> dist(
        0.0, std::sqrt(2.0 / static_cast<double>(e.fan_in)));
    for (std::size_t i = 0; i < e.size(); ++i) theta[e.offset + i] = dist(rng);
  }
  return theta;
}

double forward_loss(const LayerLayout& layout, std::span<const double> theta,
                    const Dataset& data, std::span<const int> subset,
                    const ReductionPlan& plan) {
  return evaluate(layout, theta, data, subset, plan, {}, {});
}

double full_gradient(const LayerLayout& layout, std::span<const double> theta,
                     const Dataset& data, std::span<double> grad,
                     std::span<const int> subset, const ReductionPlan& plan) {
  if (grad.empty()) throw std::invalid_argument("grad span required");
  return evaluate(layout, theta, data, subset, plan, grad, {});
}

double per_class_gradients(const LayerLayout& layout,
                           std::span<const double> theta, const Dataset& data,
                           std::span<double> class_grads,
                           std::span<double> total_grad,
                           std::span<const int> subset,
                           const ReductionPlan& plan) {
  if (class_grads.empty()) {
    throw std::invalid_argument("class_grads span required");
  }
  return evaluate(layout, theta, data, subset, plan, total_grad, class_grads);
}

}  // namespace lca::nn
