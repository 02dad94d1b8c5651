#include <cmath>

#include "doctest.h"
#include "lca/errors.hpp"
#include "lca/idx.hpp"
#include "lca/nn.hpp"
#include "lca/optimizer.hpp"
#include "lca/synth.hpp"
#include "support/fixtures.hpp"

using namespace lca;
using testing::TempDir;

TEST_CASE("idx round trip, plain and gzip") {
  const Dataset data = synth::gen_digits_corpus(200, 3);
  TempDir dir;
  SUBCASE("plain") {
    io::write_idx(data, 28, 28, dir.file("img.idx"), dir.file("lab.idx"));
    const Dataset back = io::load_mnist_idx(dir.file("img.idx"), dir.file("lab.idx"));
    CHECK(back.num_examples == 200);
    CHECK(back.feature_dim == 784);
    CHECK(back.num_classes == 10);
    CHECK(back.labels == data.labels);
    for (std::size_t i = 0; i < back.features.size(); ++i) {
      // quantization already happened in the generator, so this is exact
      CHECK(back.features[i] == data.features[i]);
    }
  }
  SUBCASE("gzip") {
    io::write_idx(data, 28, 28, dir.file("img.idx.gz"), dir.file("lab.idx.gz"));
    const Dataset back =
        io::load_mnist_idx(dir.file("img.idx.gz"), dir.file("lab.idx.gz"));
    CHECK(back.labels == data.labels);
    CHECK(back.features == data.features);
  }
}

TEST_CASE("idx loader rejects malformed files") {
  const Dataset data = synth::gen_digits_corpus(50, 4);
  TempDir dir;
  io::write_idx(data, 28, 28, dir.file("img.idx"), dir.file("lab.idx"));

  SUBCASE("bad magic") {
    std::fstream f(dir.file("img.idx"),
                   std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(3);
    f.put('\x07');
    f.close();
    CHECK_THROWS_AS(io::load_mnist_idx(dir.file("img.idx"), dir.file("lab.idx")),
                    FormatError);
  }
  SUBCASE("truncated payload") {
    std::filesystem::resize_file(dir.file("img.idx"), 16 + 49 * 784 + 100);
    CHECK_THROWS_AS(io::load_mnist_idx(dir.file("img.idx"), dir.file("lab.idx")),
                    FormatError);
  }
  SUBCASE("count mismatch") {
    const Dataset small = synth::gen_digits_corpus(40, 4);
    io::write_idx(small, 28, 28, dir.file("img2.idx"), dir.file("lab2.idx"));
    CHECK_THROWS_AS(io::load_mnist_idx(dir.file("img.idx"), dir.file("lab2.idx")),
                    FormatError);
  }
}

TEST_CASE("stratified subsets are balanced and deterministic") {
  const Dataset data = synth::gen_digits_corpus(3000, 5);
  TempDir dir;
  io::write_idx(data, 28, 28, dir.file("img.idx"), dir.file("lab.idx"));

  const Dataset a =
      io::load_mnist_idx(dir.file("img.idx"), dir.file("lab.idx"), 500, 7);
  CHECK(a.num_examples == 500);
  for (const auto& cls : a.class_index) CHECK(cls.size() == 50);

  const Dataset b =
      io::load_mnist_idx(dir.file("img.idx"), dir.file("lab.idx"), 500, 7);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);

  const Dataset c =
      io::load_mnist_idx(dir.file("img.idx"), dir.file("lab.idx"), 500, 8);
  CHECK(a.features != c.features);

  CHECK_THROWS_AS(
      io::load_mnist_idx(dir.file("img.idx"), dir.file("lab.idx"), 501, 7),
      ConfigError);
}

TEST_CASE("synthetic clusters: determinism and separability") {
  synth::ClusterSpec spec;
  spec.num_examples = 400;
  spec.feature_dim = 8;
  spec.num_classes = 4;
  spec.separation = 4.0;
  spec.seed = 11;
  const Dataset a = synth::gen_synthetic(spec);
  const Dataset b = synth::gen_synthetic(spec);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  a.validate();

  // high separation: a small net trains to near-zero loss
  const LayerLayout layout = LayerLayout::dense_stack(std::vector<std::size_t>{8, 16, 4});
  auto theta = nn::init_params(layout, 1);
  std::vector<double> grad(layout.param_count());
  for (int t = 0; t < 300; ++t) {
    nn::full_gradient(layout, theta, a, grad);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= 0.8 * grad[i];
  }
  CHECK(nn::forward_loss(layout, theta, a) < 0.1);
}

TEST_CASE("zero separation stays at chance-level loss") {
  synth::ClusterSpec spec;
  spec.num_examples = 600;
  spec.feature_dim = 6;
  spec.num_classes = 3;
  spec.separation = 0.0;
  spec.seed = 2;
  const Dataset data = synth::gen_synthetic(spec);

  const LayerLayout layout = LayerLayout::dense_stack(std::vector<std::size_t>{6, 3});
  auto theta = nn::init_params(layout, 1);
  std::vector<double> grad(layout.param_count());
  for (int t = 0; t < 150; ++t) {
    nn::full_gradient(layout, theta, data, grad);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= 0.2 * grad[i];
  }
  CHECK(nn::forward_loss(layout, theta, data) > std::log(3.0) - 0.15);
}

TEST_CASE("digits corpus: dead border, live interior, 10 balanced classes") {
  const Dataset data = synth::gen_digits_corpus(1000, 9);
  data.validate();
  CHECK(data.num_classes == 10);
  for (const auto& cls : data.class_index) CHECK(cls.size() == 100);

  std::size_t dead = 0;
  for (std::size_t d = 0; d < 784; ++d) {
    bool all_zero = true;
    for (std::size_t n = 0; n < data.num_examples && all_zero; ++n) {
      all_zero = data.row(n)[d] == 0.0f;
    }
    const std::size_t y = d / 28, x = d % 28;
    const bool border = y < 1 || y >= 27 || x < 1 || x >= 27;
    if (border) CHECK(all_zero);
    if (all_zero) ++dead;
  }
  // the structural dead border is 108 pixels; interior pixels stay alive
  CHECK(dead >= 108);
  CHECK(dead < 300);
}

TEST_CASE("dataset invariants catch broken labels") {
  Dataset data;
  data.num_examples = 2;
  data.feature_dim = 1;
  data.num_classes = 2;
  data.features = {0.5f, 0.25f};
  data.labels = {0, 5};
  CHECK_THROWS_AS(data.build_class_index(), FormatError);
}
