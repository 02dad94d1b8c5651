#ifndef LCA_IDX_HPP
#define LCA_IDX_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "lca/dataset.hpp"

namespace lca::io {

// Loads an IDX image/label pair (big-endian magics 0x803 / 0x801), plain or
// gzip-compressed. Pixels are scaled to [0,1] by /255, images flattened to
// rows x cols. If subset_size is set, a per-class stratified subset of that
// total size is selected deterministically from subset_seed.
Dataset load_mnist_idx(const std::string& image_path,
                       const std::string& label_path,
                       std::optional<std::size_t> subset_size = {},
                       std::uint64_t subset_seed = 0);

// Writes a dataset back out as an IDX pair (quantizing features to bytes);
// gzip-compresses when the path ends in ".gz". Used for fixture corpora.
void write_idx(const Dataset& data, std::size_t rows, std::size_t cols,
               const std::string& image_path, const std::string& label_path);

}  // namespace lca::io

#endif
