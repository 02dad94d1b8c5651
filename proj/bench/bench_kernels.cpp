// Timing harness for the gradient kernels: serial reference vs the sharded
// OpenMP path, on MLP shapes used throughout the project.
//
//   ./lca_bench [examples] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include "lca/nn.hpp"
#include "lca/synth.hpp"

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0;
  void start() { t0 = std::chrono::steady_clock::now(); }
  double stop() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

double flops_per_grad(const std::vector<std::size_t>& widths, std::size_t n) {
  double mac = 0.0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double layer = static_cast<double>(widths[l]) * widths[l + 1];
    mac += layer;               // forward
    mac += layer;               // weight gradient
    if (l > 0) mac += layer;    // activation gradient
  }
  return 2.0 * mac * static_cast<double>(n);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 5000;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;

  const lca::Dataset data = lca::synth::gen_digits_corpus(n, 7);
  const std::vector<std::size_t> widths{784, 100, 50, 10};
  const lca::LayerLayout layout = lca::LayerLayout::dense_stack(widths);
  const std::vector<double> theta = lca::nn::init_params(layout, 1);
  std::vector<double> grad(layout.param_count());

  const double flops = flops_per_grad(widths, n);
  std::printf("full-set gradient, N=%zu, K=%zu, threads=%d\n", n,
              layout.param_count(), omp_get_max_threads());

  Timer timer;
  double best_ref = 1e30, best_omp = 1e30;
  for (int r = 0; r < repeats; ++r) {
    timer.start();
    lca::nn::full_gradient_ref(layout, theta, data, grad);
    best_ref = std::min(best_ref, timer.stop());
  }
  for (int r = 0; r < repeats; ++r) {
    timer.start();
    lca::nn::full_gradient(layout, theta, data, grad);
    best_omp = std::min(best_omp, timer.stop());
  }

  std::printf("  serial reference : %8.1f ms  (%6.2f gflop/s)\n",
              1e3 * best_ref, flops / best_ref / 1e9);
  std::printf("  openmp kernels   : %8.1f ms  (%6.2f gflop/s, %.2fx)\n",
              1e3 * best_omp, flops / best_omp / 1e9, best_ref / best_omp);

  // per-class path, used by class-decomposed integration
  std::vector<double> class_grads(data.num_classes * layout.param_count());
  double best_pc = 1e30;
  for (int r = 0; r < repeats; ++r) {
    timer.start();
    lca::nn::per_class_gradients(layout, theta, data, class_grads, grad);
    best_pc = std::min(best_pc, timer.stop());
  }
  std::printf("  per-class        : %8.1f ms\n", 1e3 * best_pc);
  return 0;
}
