#ifndef LCA_SYNTH_HPP
#define LCA_SYNTH_HPP

#include <cstdint>

#include "lca/dataset.hpp"

namespace lca::synth {

struct ClusterSpec {
  std::size_t num_examples = 1000;
  std::size_t feature_dim = 10;
  std::size_t num_classes = 2;
  double separation = 2.0;
  std::uint64_t seed = 0;
};

// Gaussian class clusters squashed into [0,1]. separation 0 makes the
// classes indistinguishable.
Dataset gen_synthetic(const ClusterSpec& spec);

// Image-like corpus: 28x28 glyphs built from per-class blob templates with
// per-sample shift, amplitude jitter and pixel noise. The outer 2-pixel
// border is exactly zero everywhere, giving the dead-pixel population that
// first-layer zero-LCA statistics rely on. 10 classes, labels round-robin.
Dataset gen_digits_corpus(std::size_t num_examples, std::uint64_t seed);

}  // namespace lca::synth

#endif
