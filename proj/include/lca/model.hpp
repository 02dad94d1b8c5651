#ifndef LCA_MODEL_HPP
#define LCA_MODEL_HPP

#include <span>
#include <vector>

#include "lca/dataset.hpp"
#include "lca/layout.hpp"
#include "lca/nn.hpp"

namespace lca {

// What the path integrator needs from a trainable model: the training-set
// loss and its gradient at arbitrary parameter vectors, optionally split by
// class. Implementations must be deterministic functions of theta.
class LossModel {
 public:
  virtual ~LossModel() = default;

  virtual std::size_t param_count() const = 0;
  virtual std::size_t class_count() const { return 0; }

  virtual double loss(std::span<const double> theta) const = 0;
  // Writes the gradient and returns the loss at theta.
  virtual double gradient(std::span<const double> theta,
                          std::span<double> grad_out) const = 0;
  // class_grads_out is class_count() rows of param_count(); the rows must sum
  // to the full gradient. Also writes the summed gradient into grad_out.
  virtual double class_gradients(std::span<const double> theta,
                                 std::span<double> class_grads_out,
                                 std::span<double> grad_out) const;
};

// The MLP bound to a dataset.
class MlpLoss final : public LossModel {
 public:
  MlpLoss(LayerLayout layout, const Dataset& data, nn::ReductionPlan plan = {})
      : layout_(std::move(layout)), data_(&data), plan_(plan) {}

  const LayerLayout& layout() const { return layout_; }

  std::size_t param_count() const override { return layout_.param_count(); }
  std::size_t class_count() const override { return data_->num_classes; }

  double loss(std::span<const double> theta) const override {
    return nn::forward_loss(layout_, theta, *data_, {}, plan_);
  }
  double gradient(std::span<const double> theta,
                  std::span<double> grad_out) const override {
    return nn::full_gradient(layout_, theta, *data_, grad_out, {}, plan_);
  }
  double class_gradients(std::span<const double> theta,
                         std::span<double> class_grads_out,
                         std::span<double> grad_out) const override {
    return nn::per_class_gradients(layout_, theta, *data_, class_grads_out,
                                   grad_out, {}, plan_);
  }

 private:
  LayerLayout layout_;
  const Dataset* data_;
  nn::ReductionPlan plan_;
};

}  // namespace lca

#endif
