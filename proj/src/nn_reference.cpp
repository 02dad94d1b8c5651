// Plain serial MLP evaluation. Deliberately naive: one loop over examples,
// dense loops without the zero skips, accumulating straight into the output.
// This is the correctness oracle and benchmark baseline for nn_kernels.cpp.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lca/nn.hpp"

namespace lca::nn {
namespace {

double eval_ref(const LayerLayout& layout, std::span<const double> theta,
                const Dataset& data, std::span<const int> subset,
                double* grad) {
  const auto& widths = layout.widths();
  if (widths.empty() || theta.size() != layout.param_count()) {
    throw std::invalid_argument("bad layout/theta");
  }
  const std::size_t depth = widths.size() - 1;
  const auto& entries = layout.entries();
  const std::size_t m = subset.empty() ? data.num_examples : subset.size();

  std::vector<std::vector<double>> z(depth), h(depth), dz(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    z[l].resize(widths[l + 1]);
    h[l].resize(widths[l + 1]);
    dz[l].resize(widths[l + 1]);
  }

  double loss_sum = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t n = subset.empty() ? r : static_cast<std::size_t>(subset[r]);
    const float* x = data.row(n);
    const int y = data.labels[n];

    for (std::size_t l = 0; l < depth; ++l) {
      const std::size_t in = widths[l];
      const std::size_t out = widths[l + 1];
      const double* w = theta.data() + entries[2 * l].offset;
      const double* b = theta.data() + entries[2 * l + 1].offset;
      for (std::size_t j = 0; j < out; ++j) {
        double acc = b[j];
        for (std::size_t d = 0; d < in; ++d) {
          const double input = l == 0 ? static_cast<double>(x[d]) : h[l - 1][d];
          acc += input * w[d * out + j];
        }
        z[l][j] = acc;
        h[l][j] = std::max(acc, 0.0);
      }
    }

    const std::size_t c_count = widths.back();
    double zmax = z[depth - 1][0];
    for (std::size_t c = 1; c < c_count; ++c) zmax = std::max(zmax, z[depth - 1][c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < c_count; ++c) sum += std::exp(z[depth - 1][c] - zmax);
    const double lse = zmax + std::log(sum);
    loss_sum += lse - z[depth - 1][static_cast<std::size_t>(y)];

    if (grad != nullptr) {
      for (std::size_t c = 0; c < c_count; ++c) {
        dz[depth - 1][c] = std::exp(z[depth - 1][c] - lse) - (static_cast<int>(c) == y ? 1.0 : 0.0);
      }
      for (std::size_t l = depth; l-- > 0;) {
        const std::size_t in = widths[l];
        const std::size_t out = widths[l + 1];
        double* wacc = grad + entries[2 * l].offset;
        double* bacc = grad + entries[2 * l + 1].offset;
        for (std::size_t j = 0; j < out; ++j) bacc[j] += dz[l][j];
        for (std::size_t d = 0; d < in; ++d) {
          const double input = l == 0 ? static_cast<double>(x[d]) : h[l - 1][d];
          for (std::size_t j = 0; j < out; ++j) {
            wacc[d * out + j] += input * dz[l][j];
          }
        }
        if (l > 0) {
          const double* w = theta.data() + entries[2 * l].offset;
          for (std::size_t d = 0; d < in; ++d) {
            double s = 0.0;
            for (std::size_t j = 0; j < out; ++j) s += w[d * out + j] * dz[l][j];
            dz[l - 1][d] = z[l - 1][d] > 0.0 ? s : 0.0;
          }
        }
      }
    }
  }

  if (grad != nullptr) {
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < layout.param_count(); ++i) grad[i] *= inv_m;
  }
  return loss_sum / static_cast<double>(m);
}

}  // namespace

double forward_loss_ref(const LayerLayout& layout, std::span<const double> theta,
                        const Dataset& data, std::span<const int> subset) {
  return eval_ref(layout, theta, data, subset, nullptr);
}

double full_gradient_ref(const LayerLayout& layout, std::span<const double> theta,
                         const Dataset& data, std::span<double> grad,
                         std::span<const int> subset) {
  std::fill(grad.begin(), grad.end(), 0.0);
  return eval_ref(layout, theta, data, subset, grad.data());
}

}  // namespace lca::nn
