#include "lca/idx.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <vector>

#include "lca/errors.hpp"

namespace lca::io {
namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + path);
  const std::streamsize len = in.tellg();
  in.seekg(0);
  std::vector<unsigned char> buf(static_cast<std::size_t>(len));
  in.read(reinterpret_cast<char*>(buf.data()), len);
  if (!in) throw FormatError("read failure on " + path);
  return buf;
}

bool is_gzip(const std::vector<unsigned char>& buf) {
  return buf.size() >= 2 && buf[0] == 0x1f && buf[1] == 0x8b;
}

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in,
                                  const std::string& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
    throw FormatError("zlib init failed for " + path);
  }
  std::vector<unsigned char> out;
  out.reserve(in.size() * 4);
  std::vector<unsigned char> chunk(1 << 20);
  zs.next_in = const_cast<unsigned char*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("corrupt gzip stream in " + path);
    }
    out.insert(out.end(), chunk.data(),
               chunk.data() + (chunk.size() - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

std::uint32_t be32(const unsigned char* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
         (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v >> 24));
  out.push_back(static_cast<unsigned char>(v >> 16));
  out.push_back(static_cast<unsigned char>(v >> 8));
  out.push_back(static_cast<unsigned char>(v));
}

std::vector<unsigned char> maybe_gunzip(std::vector<unsigned char> buf,
                                        const std::string& path) {
  return is_gzip(buf) ? gunzip(buf, path) : buf;
}

void write_blob(const std::string& path, const std::vector<unsigned char>& blob) {
  if (path.size() > 3 && path.substr(path.size() - 3) == ".gz") {
    gzFile f = gzopen(path.c_str(), "wb");
    if (f == nullptr) throw Error("cannot open " + path);
    const int written =
        gzwrite(f, blob.data(), static_cast<unsigned>(blob.size()));
    gzclose(f);
    if (written != static_cast<int>(blob.size())) {
      throw Error("gzip write failure on " + path);
    }
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error("write failure on " + path);
}

}  // namespace

Dataset load_mnist_idx(const std::string& image_path,
                       const std::string& label_path,
                       std::optional<std::size_t> subset_size,
                       std::uint64_t subset_seed) {
  const auto images = maybe_gunzip(read_file(image_path), image_path);
  const auto labels = maybe_gunzip(read_file(label_path), label_path);

  if (images.size() < 16 || be32(images.data()) != 0x00000803u) {
    throw FormatError("bad image magic in " + image_path);
  }
  if (labels.size() < 8 || be32(labels.data()) != 0x00000801u) {
    throw FormatError("bad label magic in " + label_path);
  }
  const std::size_t n = be32(images.data() + 4);
  const std::size_t rows = be32(images.data() + 8);
  const std::size_t cols = be32(images.data() + 12);
  const std::size_t n_labels = be32(labels.data() + 4);
  if (n != n_labels) {
    throw FormatError("image/label counts differ: " + std::to_string(n) + " vs " +
                      std::to_string(n_labels));
  }
  const std::size_t d = rows * cols;
  if (images.size() != 16 + n * d) {
    throw FormatError("image payload truncated in " + image_path);
  }
  if (labels.size() != 8 + n) {
    throw FormatError("label payload truncated in " + label_path);
  }

  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    max_label = std::max(max_label, static_cast<int>(labels[8 + i]));
  }

  // optional deterministic stratified subset: equal counts per class
  std::vector<std::size_t> selected(n);
  std::iota(selected.begin(), selected.end(), 0);
  if (subset_size) {
    const std::size_t c_count = static_cast<std::size_t>(max_label) + 1;
    const std::size_t per_class = *subset_size / c_count;
    if (per_class == 0 || *subset_size % c_count != 0) {
      throw ConfigError("subset_size must be a positive multiple of the class count");
    }
    std::vector<std::vector<std::size_t>> by_class(c_count);
    for (std::size_t i = 0; i < n; ++i) by_class[labels[8 + i]].push_back(i);
    std::mt19937_64 rng(subset_seed);
    selected.clear();
    for (std::size_t c = 0; c < c_count; ++c) {
      auto& pool = by_class[c];
      if (pool.size() < per_class) {
        throw ConfigError("class " + std::to_string(c) +
                          " has too few examples for the requested subset");
      }
      std::shuffle(pool.begin(), pool.end(), rng);
      selected.insert(selected.end(), pool.begin(), pool.begin() + per_class);
    }
    std::sort(selected.begin(), selected.end());  // keep original order
  }

  Dataset data;
  data.num_examples = selected.size();
  data.feature_dim = d;
  data.num_classes = static_cast<std::size_t>(max_label) + 1;
  data.features.resize(data.num_examples * d);
  data.labels.resize(data.num_examples);
  for (std::size_t r = 0; r < selected.size(); ++r) {
    const std::size_t i = selected[r];
    const unsigned char* px = images.data() + 16 + i * d;
    float* dst = data.features.data() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      dst[j] = static_cast<float>(px[j]) / 255.0f;
    }
    data.labels[r] = static_cast<int>(labels[8 + i]);
  }
  data.id = image_path + (subset_size ? "#subset" + std::to_string(*subset_size) +
                                            "@" + std::to_string(subset_seed)
                                      : "");
  data.build_class_index();
  data.validate();
  return data;
}

void write_idx(const Dataset& data, std::size_t rows, std::size_t cols,
               const std::string& image_path, const std::string& label_path) {
  if (rows * cols != data.feature_dim) {
    throw std::invalid_argument("rows*cols must equal feature_dim");
  }
  std::vector<unsigned char> images;
  images.reserve(16 + data.num_examples * data.feature_dim);
  put_be32(images, 0x00000803u);
  put_be32(images, static_cast<std::uint32_t>(data.num_examples));
  put_be32(images, static_cast<std::uint32_t>(rows));
  put_be32(images, static_cast<std::uint32_t>(cols));
  for (float v : data.features) {
    images.push_back(static_cast<unsigned char>(std::lround(v * 255.0f)));
  }
  std::vector<unsigned char> labels;
  labels.reserve(8 + data.num_examples);
  put_be32(labels, 0x00000801u);
  put_be32(labels, static_cast<std::uint32_t>(data.num_examples));
  for (int y : data.labels) labels.push_back(static_cast<unsigned char>(y));

  write_blob(image_path, images);
  write_blob(label_path, labels);
}

}  // namespace lca::io
