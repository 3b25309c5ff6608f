#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mbbn/core/tensor.hpp"

namespace mbbn {

inline constexpr int kMinBits = 1;
inline constexpr int kMaxBits = 8;

enum class GridKind {
  /// round(clamp(x/t) * (2^(K-1)-1)) * d; contains the code 0.
  linear,
  /// Odd codes {±1, ±3, ..., ±(2^M-1)}; the only grid the {-1,+1} digit
  /// expansion can represent.
  odd,
};

std::string_view to_string(GridKind kind);
GridKind parse_grid(std::string_view name);

/// 2^bits - 1: the largest odd code, and the scale denominator of the odd grid.
inline constexpr std::int64_t odd_levels(int bits) { return (std::int64_t{1} << bits) - 1; }

/// 2^(bits-1) - 1: the largest linear code.
inline constexpr std::int64_t linear_levels(int bits) { return (std::int64_t{1} << (bits - 1)) - 1; }

void check_bits(int bits);

struct QuantizedTensor {
  Shape shape;
  std::vector<std::int32_t> codes;
  int bits = 0;
  double t = 1.0;
  /// Dequantization step: value = code * d.
  double d = 1.0;
  GridKind grid = GridKind::odd;

  std::size_t size() const { return codes.size(); }
  double value(std::size_t i) const { return codes[i] * d; }
  Tensor dequantize() const;

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

std::int32_t linear_code(double x, int bits, double t);
std::int32_t odd_code(double x, int bits);

QuantizedTensor quantize_linear(const Tensor& x, int bits, double t = 1.0);
QuantizedTensor quantize_odd(const Tensor& x, int bits);
QuantizedTensor quantize(const Tensor& x, GridKind grid, int bits, double t = 1.0);

/// Straight-through gradient of either quantizer: 1 where |x/t| <= 1, else 0.
inline double quantize_ste_grad(double x, double t = 1.0) {
  const double u = x / t;
  return (u >= -1.0 && u <= 1.0) ? 1.0 : 0.0;
}

/// d(dequantized value)/dt under the straight-through convention on the clamp:
/// the value tracks x inside the range and saturates at ±t outside it.
inline double quantize_linear_t_grad(double x, double t) {
  const double u = x / t;
  if (u > 1.0) return 1.0;
  if (u < -1.0) return -1.0;
  return 0.0;
}

}  // namespace mbbn
