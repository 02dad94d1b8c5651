#include "lca/model.hpp"

#include <stdexcept>

namespace lca {

double LossModel::class_gradients(std::span<const double> /*theta*/,
                                  std::span<double> /*class_grads_out*/,
                                  std::span<double> /*grad_out*/) const {
  throw std::logic_error("model does not support class decomposition");
}

}  // namespace lca
