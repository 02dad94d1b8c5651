#include "doctest.h"
#include "lca/crc64.hpp"
#include "lca/errors.hpp"
#include "lca/layout.hpp"

using lca::LayerLayout;

TEST_CASE("dense stack layout for the standard MLP") {
  const std::vector<std::size_t> widths{784, 100, 50, 10};
  const LayerLayout layout = LayerLayout::dense_stack(widths);
  CHECK(layout.param_count() == 84060);
  CHECK(layout.group_count() == 3);
  CHECK(layout.entries().size() == 6);
  CHECK(layout.group_name(0) == "dense0");
  CHECK(layout.group_name(2) == "dense2");

  // offsets contiguous, kernel then bias
  std::size_t expect = 0;
  for (const auto& e : layout.entries()) {
    CHECK(e.offset == expect);
    expect += e.size();
  }
  CHECK(expect == layout.param_count());
}

TEST_CASE("every flat index maps to exactly one entry and group") {
  const LayerLayout layout = LayerLayout::dense_stack(std::vector<std::size_t>{3, 5, 2});
  CHECK(layout.param_count() == 3 * 5 + 5 + 5 * 2 + 2);
  CHECK(layout.group_of_index(0) == 0);
  CHECK(layout.group_of_index(14) == 0);   // last kernel weight of dense0
  CHECK(layout.group_of_index(15) == 0);   // dense0 bias folds into group 0
  CHECK(layout.group_of_index(20) == 1);
  CHECK_THROWS_AS(layout.entry_of_index(32), std::out_of_range);
}

TEST_CASE("neuron ids follow output units") {
  const LayerLayout layout = LayerLayout::dense_stack(std::vector<std::size_t>{3, 2, 2});
  // dense0 kernel is 3x2 row-major: index = row*2 + col -> neuron = col
  CHECK(layout.neuron_count() == 4);
  CHECK(layout.neuron_of_index(0) == 0);
  CHECK(layout.neuron_of_index(1) == 1);
  CHECK(layout.neuron_of_index(4) == 0);
  CHECK(layout.neuron_of_index(6) == 0);  // dense0 bias 0
  CHECK(layout.neuron_of_index(7) == 1);
  CHECK(layout.neuron_of_index(8) == 2);  // dense1 kernel starts
}

TEST_CASE("layouts round-trip through json") {
  const LayerLayout layout = LayerLayout::dense_stack(std::vector<std::size_t>{4, 3, 2});
  const LayerLayout back = LayerLayout::from_json(layout.to_json());
  CHECK(back == layout);
  CHECK(back.widths() == layout.widths());
}

TEST_CASE("degenerate architectures are rejected") {
  CHECK_THROWS_AS(LayerLayout::dense_stack(std::vector<std::size_t>{}), lca::ConfigError);
  CHECK_THROWS_AS(LayerLayout::dense_stack(std::vector<std::size_t>{5}), lca::ConfigError);
  CHECK_THROWS_AS(LayerLayout::dense_stack(std::vector<std::size_t>{5, 0, 2}),
                  lca::ConfigError);
}

TEST_CASE("crc64 check vector") {
  const char* s = "123456789";
  CHECK(lca::crc64(s, 9) == 0x995dc9bbdf1939faull);
}
