#ifndef LCA_CRC64_HPP
#define LCA_CRC64_HPP

#include <cstddef>
#include <cstdint>

namespace lca {

// CRC-64/XZ (ECMA-182 polynomial, reflected, init/xorout all-ones).
// Check value: crc64("123456789") == 0x995dc9bbdf1939fa.
class Crc64 {
 public:
  Crc64() = default;

  void update(const void* data, std::size_t len);
  std::uint64_t value() const { return state_ ^ 0xffffffffffffffffull; }

 private:
  std::uint64_t state_ = 0xffffffffffffffffull;
};

std::uint64_t crc64(const void* data, std::size_t len);

}  // namespace lca

#endif
