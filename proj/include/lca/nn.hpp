#ifndef LCA_NN_HPP
#define LCA_NN_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "lca/dataset.hpp"
#include "lca/layout.hpp"

namespace lca::nn {

// Full-set gradient evaluation is sharded: each shard is a fixed contiguous
// slice of the example list, shards are summed in a balanced tree over the
// shard index. The result is bitwise identical for any OpenMP thread count.
struct ReductionPlan {
  std::size_t shard_size = 512;
};

// He-normal kernels (std = sqrt(2/fan_in)), zero biases. Deterministic for a
// fixed seed.
std::vector<double> init_params(const LayerLayout& layout, std::uint64_t seed);

// Mean cross-entropy of the ReLU MLP over data[subset] (empty subset = all
// examples). All arithmetic in double.
double forward_loss(const LayerLayout& layout, std::span<const double> theta,
                    const Dataset& data, std::span<const int> subset = {},
                    const ReductionPlan& plan = {});

// Reverse-mode gradient of forward_loss. Returns the loss. grad must be
// param_count() long.
double full_gradient(const LayerLayout& layout, std::span<const double> theta,
                     const Dataset& data, std::span<double> grad,
                     std::span<const int> subset = {},
                     const ReductionPlan& plan = {});

// Per-class gradients, normalized by the total subset size (not the class
// count) so that the C rows sum to the full gradient. class_grads must be
// C * param_count() long, row-major by class. If total_grad is non-empty the
// class sums are also reduced into it. Returns the loss.
double per_class_gradients(const LayerLayout& layout,
                           std::span<const double> theta, const Dataset& data,
                           std::span<double> class_grads,
                           std::span<double> total_grad = {},
                           std::span<const int> subset = {},
                           const ReductionPlan& plan = {});

// Serial reference implementations: one plain loop over examples, no
// sharding, no sparsity skip. Kept as the oracle for the OpenMP kernels and
// as the benchmark baseline.
double forward_loss_ref(const LayerLayout& layout, std::span<const double> theta,
                        const Dataset& data, std::span<const int> subset = {});
double full_gradient_ref(const LayerLayout& layout, std::span<const double> theta,
                         const Dataset& data, std::span<double> grad,
                         std::span<const int> subset = {});

}  // namespace lca::nn

#endif
