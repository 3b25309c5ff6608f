#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mbbn/core/error.hpp"

namespace mbbn {

inline constexpr std::size_t kWordBits = 64;

inline constexpr std::size_t words_for(std::size_t n) { return (n + kWordBits - 1) / kWordBits; }

/// Mask selecting the valid bits of the final word of an n-element plane.
inline constexpr std::uint64_t tail_mask(std::size_t n) {
  const std::size_t rem = n % kWordBits;
  return rem == 0 ? ~std::uint64_t{0} : (std::uint64_t{1} << rem) - 1;
}

/// One {-1,+1} digit plane packed LSB-first into 64-bit words.
/// Bit 1 is +1, bit 0 is -1. Bits at positions >= n_valid are always zero.
struct BitPlane {
  std::vector<std::uint64_t> words;
  std::size_t n_valid = 0;

  int digit(std::size_t i) const { return (words[i / kWordBits] >> (i % kWordBits)) & 1U ? 1 : -1; }

  friend bool operator==(const BitPlane&, const BitPlane&) = default;
};

template <typename T>
BitPlane pack(std::span<const T> digits) {
  BitPlane plane{std::vector<std::uint64_t>(words_for(digits.size()), 0), digits.size()};
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (digits[i] == T(1)) {
      plane.words[i / kWordBits] |= std::uint64_t{1} << (i % kWordBits);
    } else if (digits[i] != T(-1)) {
      throw EncodingError("pack: digit at index " + std::to_string(i) + " is not -1 or +1");
    }
  }
  return plane;
}

template <typename T>
BitPlane pack(const std::vector<T>& digits) {
  return pack(std::span<const T>(digits));
}

std::vector<std::int8_t> unpack(const BitPlane& plane);

/// Sum of a_i * b_i over n {-1,+1} digits stored in equal-length word runs:
/// 2 * popcount(xnor(a, b) masked to n bits) - n.
inline std::int64_t xnor_popcount(const std::uint64_t* a, const std::uint64_t* b, std::size_t n) {
  const std::size_t full = n / kWordBits;
  std::int64_t agree = 0;
  for (std::size_t w = 0; w < full; ++w) agree += std::popcount(~(a[w] ^ b[w]));
  if (n % kWordBits != 0) agree += std::popcount(~(a[full] ^ b[full]) & tail_mask(n));
  return 2 * agree - static_cast<std::int64_t>(n);
}

/// Exact {-1,+1} dot product of two planes. Throws ShapeError on length mismatch.
std::int64_t xnor_popcount_dot(const BitPlane& a, const BitPlane& b);

/// n_valid as u64 LE, then each word as u64 LE.
void write_bitplane(std::ostream& os, const BitPlane& plane);
BitPlane read_bitplane(std::istream& is);

}  // namespace mbbn
