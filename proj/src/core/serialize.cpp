#include "mbbn/core/serialize.hpp"

#include <bit>
#include <istream>
#include <ostream>

namespace mbbn::io {
namespace {

template <typename U>
void write_le(std::ostream& os, U v) {
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(bytes, sizeof(U));
  if (!os) throw IoError("write failed");
}

template <typename U>
U read_le(std::istream& is) {
  unsigned char bytes[sizeof(U)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(U));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(U))) throw IoError("unexpected end of file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

// Guards against absurd headers from corrupt files before we allocate.
constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

}  // namespace

void write_u64(std::ostream& os, std::uint64_t v) { write_le(os, v); }
std::uint64_t read_u64(std::istream& is) { return read_le<std::uint64_t>(is); }

void write_f32(std::ostream& os, float v) { write_le(os, std::bit_cast<std::uint32_t>(v)); }
float read_f32(std::istream& is) { return std::bit_cast<float>(read_le<std::uint32_t>(is)); }

void write_f64(std::ostream& os, double v) { write_le(os, std::bit_cast<std::uint64_t>(v)); }
double read_f64(std::istream& is) { return std::bit_cast<double>(read_le<std::uint64_t>(is)); }

void write_i16(std::ostream& os, std::int16_t v) { write_le(os, static_cast<std::uint16_t>(v)); }
std::int16_t read_i16(std::istream& is) { return static_cast<std::int16_t>(read_le<std::uint16_t>(is)); }

void write_tensor(std::ostream& os, const Tensor& t) {
  write_u64(os, t.rank());
  for (std::size_t d : t.shape()) write_u64(os, d);
  for (double v : t.values()) write_f32(os, static_cast<float>(v));
}

Tensor read_tensor(std::istream& is) {
  const std::uint64_t rank = read_u64(is);
  if (rank == 0 || rank > kMaxRank) throw IoError("corrupt tensor header: rank " + std::to_string(rank));
  Shape shape(rank);
  std::uint64_t numel = 1;
  for (auto& d : shape) {
    const std::uint64_t v = read_u64(is);
    if (v == 0 || v > kMaxElements || numel * v > kMaxElements) throw IoError("corrupt tensor header: dims");
    d = static_cast<std::size_t>(v);
    numel *= v;
  }
  std::vector<double> values(numel);
  for (auto& v : values) v = read_f32(is);
  return Tensor(std::move(shape), std::move(values));
}

std::size_t tensor_payload_bytes(const Tensor& t) { return t.size() * sizeof(float); }

}  // namespace mbbn::io
