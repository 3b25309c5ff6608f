#include "mbbn/gemm/encoded_matrix.hpp"

#include <string>

namespace mbbn {

EncodedMatrix::EncodedMatrix(std::size_t rows, std::size_t cols, int bits)
    : rows_(rows), cols_(cols), bits_(bits), words_per_row_(words_for(cols)) {
  check_bits(bits);
  words_.assign(rows_ * static_cast<std::size_t>(bits_) * words_per_row_, 0);
}

EncodedMatrix EncodedMatrix::from_codes(const QuantizedTensor& q) {
  if (q.shape.size() != 2) throw ShapeError("EncodedMatrix needs rank-2 codes, got " + shape_string(q.shape));
  if (q.grid != GridKind::odd) throw EncodingError("EncodedMatrix needs odd-grid codes");
  EncodedMatrix e(q.shape[0], q.shape[1], q.bits);
  for (std::size_t r = 0; r < e.rows_; ++r) {
    for (std::size_t c = 0; c < e.cols_; ++c) {
      const auto digits = odd_code_digits(q.codes[r * e.cols_ + c], q.bits);
      for (int m = 1; m <= q.bits; ++m) {
        if (digits[static_cast<std::size_t>(m - 1)] > 0) {
          e.plane(r, m)[c / kWordBits] |= std::uint64_t{1} << (c % kWordBits);
        }
      }
    }
  }
  return e;
}

EncodedMatrix EncodedMatrix::from_planes(std::span<const Tensor> planes) {
  if (planes.empty()) throw ConfigError("EncodedMatrix::from_planes needs at least one plane");
  const Shape& shape = planes.front().shape();
  if (shape.size() != 2) throw ShapeError("plane must be rank 2, got " + shape_string(shape));
  EncodedMatrix e(shape[0], shape[1], static_cast<int>(planes.size()));
  for (std::size_t k = 0; k < planes.size(); ++k) {
    if (planes[k].shape() != shape) throw ShapeError("planes disagree in shape");
    for (std::size_t r = 0; r < e.rows_; ++r) {
      for (std::size_t c = 0; c < e.cols_; ++c) {
        const double v = planes[k](r, c);
        if (v == 1.0) {
          e.plane(r, static_cast<int>(k) + 1)[c / kWordBits] |= std::uint64_t{1} << (c % kWordBits);
        } else if (v != -1.0) {
          throw EncodingError("plane digit is not -1 or +1");
        }
      }
    }
  }
  return e;
}

EncodedMatrix EncodedMatrix::from_encoded(const EncodedTensor& enc) {
  if (enc.shape.size() != 2) throw ShapeError("EncodedMatrix needs a rank-2 encoding");
  EncodedMatrix e(enc.shape[0], enc.shape[1], enc.bits);
  if (enc.planes.size() != static_cast<std::size_t>(enc.bits)) throw EncodingError("plane count differs from bits");
  for (const auto& p : enc.planes) {
    if (p.n_valid != e.rows_ * e.cols_) throw EncodingError("plane length differs from matrix size");
  }
  for (std::size_t r = 0; r < e.rows_; ++r) {
    for (std::size_t c = 0; c < e.cols_; ++c) {
      for (int m = 1; m <= e.bits_; ++m) {
        if (enc.digit(m, r * e.cols_ + c) > 0) e.plane(r, m)[c / kWordBits] |= std::uint64_t{1} << (c % kWordBits);
      }
    }
  }
  return e;
}

BitPlane EncodedMatrix::row_plane(std::size_t row, int m) const {
  const std::uint64_t* p = plane(row, m);
  return BitPlane{std::vector<std::uint64_t>(p, p + words_per_row_), cols_};
}

int EncodedMatrix::digit(std::size_t row, std::size_t col, int m) const {
  return (plane(row, m)[col / kWordBits] >> (col % kWordBits)) & 1U ? 1 : -1;
}

std::int64_t EncodedMatrix::code(std::size_t row, std::size_t col) const {
  std::int64_t v = 0;
  for (int m = 1; m <= bits_; ++m) v += (std::int64_t{1} << (m - 1)) * digit(row, col, m);
  return v;
}

IntTensor EncodedMatrix::codes() const {
  IntTensor out({rows_, cols_});
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) out(r, c) = code(r, c);
  }
  return out;
}

EncodedTensor EncodedMatrix::to_encoded() const {
  const std::size_t n = rows_ * cols_;
  EncodedTensor enc{{rows_, cols_}, bits_, {}};
  enc.planes.assign(static_cast<std::size_t>(bits_), BitPlane{std::vector<std::uint64_t>(words_for(n), 0), n});
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) {
      const std::size_t i = r * cols_ + c;
      for (int m = 1; m <= bits_; ++m) {
        if (digit(r, c, m) > 0) enc.planes[static_cast<std::size_t>(m - 1)].words[i / kWordBits] |= std::uint64_t{1} << (i % kWordBits);
      }
    }
  }
  return enc;
}

}  // namespace mbbn
