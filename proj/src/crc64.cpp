#include "lca/crc64.hpp"

#include <array>

namespace lca {
namespace {

constexpr std::uint64_t kPolyReflected = 0xc96c5795d7870f42ull;

std::array<std::uint64_t, 256> make_table() {
  std::array<std::uint64_t, 256> table{};
  for (std::uint64_t i = 0; i < 256; ++i) {
    std::uint64_t crc = i;
    for (int bit = 0; bit < 8; ++bit) {
      crc = (crc & 1) ? (crc >> 1) ^ kPolyReflected : crc >> 1;
    }
    table[static_cast<std::size_t>(i)] = crc;
  }
  return table;
}

const std::array<std::uint64_t, 256>& table() {
  static const auto t = make_table();
  return t;
}

}  // namespace

void Crc64::update(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  const auto& t = table();
  std::uint64_t crc = state_;
  for (std::size_t i = 0; i < len; ++i) {
    crc = t[(crc ^ p[i]) & 0xff] ^ (crc >> 8);
  }
  state_ = crc;
}

std::uint64_t crc64(const void* data, std::size_t len) {
  Crc64 c;
  c.update(data, len);
  return c.value();
}

}  // namespace lca
