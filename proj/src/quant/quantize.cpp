#include "mbbn/quant/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mbbn {
namespace {

// Cell edges such as 2/3 are not exactly representable; inputs within this
// distance (in half-cell units) of an edge are assigned to the outer cell,
// matching the closed outer intervals of the odd grid.
constexpr double kEdgeSnap = 1e-9;

}  // namespace

std::string_view to_string(GridKind kind) { return kind == GridKind::odd ? "odd" : "linear"; }

GridKind parse_grid(std::string_view name) {
  if (name == "odd") return GridKind::odd;
  if (name == "linear") return GridKind::linear;
  throw ConfigError("unknown grid '" + std::string(name) + "' (expected odd or linear)");
}

void check_bits(int bits) {
  if (bits < kMinBits || bits > kMaxBits) {
    throw ConfigError("bit width " + std::to_string(bits) + " outside 1..8");
  }
}

Tensor QuantizedTensor::dequantize() const {
  std::vector<double> values(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) values[i] = value(i);
  return Tensor(shape, std::move(values));
}

std::int32_t linear_code(double x, int bits, double t) {
  const double u = std::clamp(x / t, -1.0, 1.0);
  return static_cast<std::int32_t>(std::round(u * static_cast<double>(linear_levels(bits))));
}

std::int32_t odd_code(double x, int bits) {
  const auto levels = odd_levels(bits);
  const double c = std::clamp(x, -1.0, 1.0);
  const std::int64_t sign = c > 0.0 ? 1 : -1;
  const auto cell = static_cast<std::int64_t>(std::floor(std::abs(c) * static_cast<double>(levels) / 2.0 + kEdgeSnap));
  const std::int64_t code = std::min(2 * cell + 1, levels);
  return static_cast<std::int32_t>(sign * code);
}

QuantizedTensor quantize_linear(const Tensor& x, int bits, double t) {
  check_bits(bits);
  if (bits < 2) {
    throw ConfigError("linear quantizer needs at least 2 bits (2^(K-1)-1 is 0 at K=1)");
  }
  if (!(t > 0.0) || !std::isfinite(t)) throw ConfigError("linear quantizer threshold t must be > 0");
  QuantizedTensor q{x.shape(), std::vector<std::int32_t>(x.size()), bits, t,
                    t / static_cast<double>(linear_levels(bits)), GridKind::linear};
  const auto v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) q.codes[i] = linear_code(v[i], bits, t);
  return q;
}

QuantizedTensor quantize_odd(const Tensor& x, int bits) {
  check_bits(bits);
  QuantizedTensor q{x.shape(), std::vector<std::int32_t>(x.size()), bits, 1.0,
                    1.0 / static_cast<double>(odd_levels(bits)), GridKind::odd};
  const auto v = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) q.codes[i] = odd_code(v[i], bits);
  return q;
}

QuantizedTensor quantize(const Tensor& x, GridKind grid, int bits, double t) {
  return grid == GridKind::odd ? quantize_odd(x, bits) : quantize_linear(x, bits, t);
}

}  // namespace mbbn
