#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mbbn/bitops/bitplane.hpp"
#include "mbbn/core/tensor.hpp"
#include "mbbn/quant/encoder.hpp"
#include "mbbn/quant/quantize.hpp"

namespace mbbn {

/// Row-major matrix of odd codes held as per-row digit planes.
///
/// Each logical row owns `bits` planes of `cols` digits, stored contiguously
/// as [row][plane][word] so a GEMM row touches one cache-friendly block. The
/// reduction axis is the column axis for both GEMM operands.
class EncodedMatrix {
 public:
  EncodedMatrix() = default;

  /// All digits -1, i.e. every code is -(2^bits - 1).
  EncodedMatrix(std::size_t rows, std::size_t cols, int bits);

  /// Rank-2 odd-grid codes. Throws EncodingError for anything else.
  static EncodedMatrix from_codes(const QuantizedTensor& q);

  /// planes[k] is the {-1,+1} matrix of digit k+1 (least significant first).
  static EncodedMatrix from_planes(std::span<const Tensor> planes);

  /// Inverse of to_encoded: plane-major digits over the row-major elements.
  static EncodedMatrix from_encoded(const EncodedTensor& e);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  int bits() const { return bits_; }
  std::size_t words_per_row() const { return words_per_row_; }

  /// Words of digit plane m (1..bits) of a row.
  const std::uint64_t* plane(std::size_t row, int m) const { return words_.data() + offset(row, m); }
  std::uint64_t* plane(std::size_t row, int m) { return words_.data() + offset(row, m); }

  BitPlane row_plane(std::size_t row, int m) const;
  int digit(std::size_t row, std::size_t col, int m) const;
  std::int64_t code(std::size_t row, std::size_t col) const;

  IntTensor codes() const;
  EncodedTensor to_encoded() const;

  friend bool operator==(const EncodedMatrix&, const EncodedMatrix&) = default;

 private:
  std::size_t offset(std::size_t row, int m) const {
    return (row * static_cast<std::size_t>(bits_) + static_cast<std::size_t>(m - 1)) * words_per_row_;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  int bits_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace mbbn
