#pragma once

#include <cstdint>
#include <vector>

#include "mbbn/bitops/bitplane.hpp"
#include "mbbn/core/tensor.hpp"
#include "mbbn/quant/quantize.hpp"

namespace mbbn {

/// M digit planes over the flattened elements of a tensor.
/// planes[0] holds the least significant digit c_1, planes[M-1] holds c_M.
struct EncodedTensor {
  Shape shape;
  int bits = 0;
  std::vector<BitPlane> planes;

  std::size_t size() const { return planes.empty() ? 0 : planes.front().n_valid; }

  /// Digit c_m of element i, m in 1..M.
  int digit(int m, std::size_t i) const { return planes[static_cast<std::size_t>(m - 1)].digit(i); }

  /// sum_m 2^(m-1) c_m for element i.
  std::int64_t code(std::size_t i) const;
  std::vector<std::int64_t> codes() const;

  friend bool operator==(const EncodedTensor&, const EncodedTensor&) = default;
};

/// Digits of one odd code: b = (code + 2^M - 1) / 2 in binary, c_m = 2 b_m - 1.
/// Throws EncodingError for even codes or |code| > 2^M - 1.
std::vector<std::int8_t> odd_code_digits(std::int64_t code, int bits);

/// Canonical encoder: exact digit expansion of odd-grid codes.
EncodedTensor codes_to_digits(const QuantizedTensor& q);

/// Pre-sign trigonometric surrogate of plane m: sin(a x) for m = M and
/// -sin(a x) for m < M, with a = (2^M - 1) / 2^m * pi.
double encoder_surrogate(double x, int bits, int m);

/// sign of encoder_surrogate with sign(0) := +1.
int encoder_digit(double x, int bits, int m);

/// Trigonometric M-bit encoder. Agrees with codes_to_digits(quantize_odd(x))
/// everywhere except on cell edges, where sign() of a zero sine is ambiguous.
EncodedTensor mbit_encoder(const Tensor& x, int bits);

/// d/dx of encoder_surrogate on [-1, 1], 0 outside.
double encoder_derivative(double x, int bits, int m);

/// sign(HTanh(w)) with sign(0) := +1.
inline double binarize(double w) { return w >= 0.0 ? 1.0 : -1.0; }

/// Straight-through gradient of binarize: 1 on |w| <= 1, 0 outside.
inline double binarize_grad(double w) { return (w >= -1.0 && w <= 1.0) ? 1.0 : 0.0; }

Tensor binarize(const Tensor& w);

}  // namespace mbbn
