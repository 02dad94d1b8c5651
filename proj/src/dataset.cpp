#include "lca/dataset.hpp"

#include <cmath>

#include "lca/errors.hpp"

namespace lca {

void Dataset::build_class_index() {
  class_index.assign(num_classes, {});
  for (std::size_t n = 0; n < num_examples; ++n) {
    const int y = labels[n];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw FormatError("label " + std::to_string(y) + " out of range at example " +
                        std::to_string(n));
    }
    class_index[static_cast<std::size_t>(y)].push_back(static_cast<int>(n));
  }
}

void Dataset::validate() const {
  if (features.size() != num_examples * feature_dim) {
    throw FormatError("feature matrix size does not match N x D");
  }
  if (labels.size() != num_examples) {
    throw FormatError("label count does not match N");
  }
  if (num_classes == 0) throw FormatError("dataset has no classes");
  std::size_t indexed = 0;
  for (const auto& cls : class_index) indexed += cls.size();
  if (class_index.size() != num_classes || indexed != num_examples) {
    throw FormatError("class_index does not partition the dataset");
  }
  for (float v : features) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw FormatError("feature outside [0,1]");
    }
  }
}

}  // namespace lca
