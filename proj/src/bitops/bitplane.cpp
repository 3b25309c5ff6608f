#include "mbbn/bitops/bitplane.hpp"

#include <istream>
#include <ostream>

#include "mbbn/core/serialize.hpp"

namespace mbbn {

std::vector<std::int8_t> unpack(const BitPlane& plane) {
  std::vector<std::int8_t> digits(plane.n_valid);
  for (std::size_t i = 0; i < plane.n_valid; ++i) digits[i] = static_cast<std::int8_t>(plane.digit(i));
  return digits;
}

std::int64_t xnor_popcount_dot(const BitPlane& a, const BitPlane& b) {
  if (a.n_valid != b.n_valid) {
    throw ShapeError("xnor_popcount_dot: plane lengths differ (" + std::to_string(a.n_valid) + " vs " +
                     std::to_string(b.n_valid) + ")");
  }
  return xnor_popcount(a.words.data(), b.words.data(), a.n_valid);
}

void write_bitplane(std::ostream& os, const BitPlane& plane) {
  io::write_u64(os, plane.n_valid);
  for (std::uint64_t w : plane.words) io::write_u64(os, w);
}

BitPlane read_bitplane(std::istream& is) {
  BitPlane plane;
  plane.n_valid = static_cast<std::size_t>(io::read_u64(is));
  if (plane.n_valid > (std::size_t{1} << 40)) throw IoError("corrupt bit plane header");
  plane.words.resize(words_for(plane.n_valid));
  for (auto& w : plane.words) w = io::read_u64(is);
  if (!plane.words.empty() && (plane.words.back() & ~tail_mask(plane.n_valid)) != 0) {
    throw IoError("corrupt bit plane: padding bits set");
  }
  return plane;
}

}  // namespace mbbn
