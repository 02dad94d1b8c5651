#ifndef LCA_LAYOUT_HPP
#define LCA_LAYOUT_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace lca {

enum class ParamKind { DenseKernel, DenseBias };

// One contiguous block of the flat parameter vector. Kernels are stored
// row-major as fan_in x fan_out; biases are length fan_out. `group` is the
// kernel-layer index the block aggregates into (a bias shares the group of
// its kernel), which is what all per-layer statistics are keyed on.
struct LayerEntry {
  std::string name;
  ParamKind kind = ParamKind::DenseKernel;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  std::size_t group = 0;

  std::size_t size() const { return rows * cols; }
};

class LayerLayout {
 public:
  LayerLayout() = default;

  // Dense feed-forward stack: widths = [D, h1, ..., C]. Entry order is
  // dense0.kernel, dense0.bias, dense1.kernel, ...
  static LayerLayout dense_stack(std::span<const std::size_t> widths);

  // Single unnamed block, for models that are not neural networks.
  static LayerLayout flat(std::size_t n);

  std::size_t param_count() const { return total_; }
  std::size_t group_count() const { return group_count_; }
  const std::vector<LayerEntry>& entries() const { return entries_; }
  const std::vector<std::size_t>& widths() const { return widths_; }

  std::string group_name(std::size_t group) const;
  const LayerEntry& entry_of_index(std::size_t flat_index) const;
  std::size_t group_of_index(std::size_t flat_index) const;
  bool has_group(const std::string& name) const;
  std::size_t group_by_name(const std::string& name) const;

  // Number of output units summed over dense layers; used for per-neuron
  // aggregation. Neuron ids are assigned layer by layer, output unit by
  // output unit.
  std::size_t neuron_count() const;
  std::size_t neuron_base(std::size_t group) const;
  // Neuron owning flat index i: kernel weight (r, c) and bias c of a layer
  // both belong to that layer's output unit c.
  std::size_t neuron_of_index(std::size_t flat_index) const;

  nlohmann::json to_json() const;
  static LayerLayout from_json(const nlohmann::json& j);

  bool operator==(const LayerLayout& other) const;

 private:
  void finish();  // validates contiguity, builds lookup tables

  std::vector<LayerEntry> entries_;
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> neuron_bases_;
  std::size_t total_ = 0;
  std::size_t group_count_ = 0;
};

}  // namespace lca

#endif
