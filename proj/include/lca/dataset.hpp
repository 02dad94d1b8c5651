#ifndef LCA_DATASET_HPP
#define LCA_DATASET_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace lca {

// Classification dataset: N x D features in [0,1] plus integer labels.
// class_index partitions [0, N) by label and is what per-class gradient
// evaluation iterates over.
struct Dataset {
  std::size_t num_examples = 0;
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::vector<float> features;  // row-major N x D
  std::vector<int> labels;
  std::vector<std::vector<int>> class_index;
  std::string id;

  const float* row(std::size_t n) const { return features.data() + n * feature_dim; }

  void build_class_index();
  void validate() const;  // throws FormatError on any broken invariant
};

}  // namespace lca

#endif
