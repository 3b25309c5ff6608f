#include "mbbn/quant/encoder.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mbbn {
namespace {

double plane_frequency(int bits, int m) {
  return static_cast<double>(odd_levels(bits)) / static_cast<double>(std::int64_t{1} << m) * std::numbers::pi;
}

void check_plane(int bits, int m) {
  check_bits(bits);
  if (m < 1 || m > bits) {
    throw ConfigError("plane index " + std::to_string(m) + " outside 1.." + std::to_string(bits));
  }
}

EncodedTensor empty_encoding(const Shape& shape, int bits, std::size_t n) {
  EncodedTensor e{shape, bits, {}};
  e.planes.assign(static_cast<std::size_t>(bits), BitPlane{std::vector<std::uint64_t>(words_for(n), 0), n});
  return e;
}

void set_digit(BitPlane& plane, std::size_t i, int digit) {
  if (digit > 0) plane.words[i / kWordBits] |= std::uint64_t{1} << (i % kWordBits);
}

}  // namespace

std::int64_t EncodedTensor::code(std::size_t i) const {
  std::int64_t v = 0;
  for (int m = 1; m <= bits; ++m) v += (std::int64_t{1} << (m - 1)) * digit(m, i);
  return v;
}

std::vector<std::int64_t> EncodedTensor::codes() const {
  std::vector<std::int64_t> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = code(i);
  return out;
}

std::vector<std::int8_t> odd_code_digits(std::int64_t code, int bits) {
  check_bits(bits);
  const std::int64_t levels = odd_levels(bits);
  if (code % 2 == 0 || code > levels || code < -levels) {
    throw EncodingError("code " + std::to_string(code) + " is not an odd integer within ±" +
                        std::to_string(levels));
  }
  const auto b = static_cast<std::uint64_t>((code + levels) / 2);
  std::vector<std::int8_t> digits(static_cast<std::size_t>(bits));
  for (int m = 0; m < bits; ++m) digits[static_cast<std::size_t>(m)] = ((b >> m) & 1U) ? 1 : -1;
  return digits;
}

EncodedTensor codes_to_digits(const QuantizedTensor& q) {
  if (q.grid != GridKind::odd) {
    throw EncodingError("codes_to_digits requires odd-grid codes; linear grid contains 0");
  }
  EncodedTensor e = empty_encoding(q.shape, q.bits, q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto digits = odd_code_digits(q.codes[i], q.bits);
    for (int m = 0; m < q.bits; ++m) set_digit(e.planes[static_cast<std::size_t>(m)], i, digits[static_cast<std::size_t>(m)]);
  }
  return e;
}

double encoder_surrogate(double x, int bits, int m) {
  check_plane(bits, m);
  const double s = std::sin(plane_frequency(bits, m) * x);
  return m == bits ? s : -s;
}

int encoder_digit(double x, int bits, int m) { return encoder_surrogate(x, bits, m) >= 0.0 ? 1 : -1; }

EncodedTensor mbit_encoder(const Tensor& x, int bits) {
  check_bits(bits);
  EncodedTensor e = empty_encoding(x.shape(), bits, x.size());
  const auto v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int m = 1; m <= bits; ++m) set_digit(e.planes[static_cast<std::size_t>(m - 1)], i, encoder_digit(v[i], bits, m));
  }
  return e;
}

double encoder_derivative(double x, int bits, int m) {
  check_plane(bits, m);
  if (x < -1.0 || x > 1.0) return 0.0;
  const double a = plane_frequency(bits, m);
  const double d = a * std::cos(a * x);
  return m == bits ? d : -d;
}

Tensor binarize(const Tensor& w) {
  return map(w, [](double v) { return binarize(v); });
}

}  // namespace mbbn
