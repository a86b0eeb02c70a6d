#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace amsreg {

using Bytes = std::vector<unsigned char>;

std::uint32_t crc32_of(std::span<const unsigned char> bytes);
std::string hex32(std::uint32_t value);

// Little-endian encode of an integer or IEEE float, independent of host order.
template <typename V>
void append_le(Bytes& out, V value) {
  using U = std::conditional_t<sizeof(V) == 8, std::uint64_t,
                               std::conditional_t<sizeof(V) == 4, std::uint32_t, std::uint16_t>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(V); ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

template <typename V>
V read_le(std::span<const unsigned char> in, std::size_t offset) {
  using U = std::conditional_t<sizeof(V) == 8, std::uint64_t,
                               std::conditional_t<sizeof(V) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(V); ++i) bits |= static_cast<U>(U{in[offset + i]} << (8 * i));
  return std::bit_cast<V>(bits);
}

}  // namespace amsreg
