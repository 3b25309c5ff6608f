#include "mbbn/gemm/encoded_gemm.hpp"

#include <algorithm>
#include <string>
#include <thread>
#include <vector>

namespace mbbn {
namespace {

void gemm_rows(const EncodedMatrix& x, const EncodedMatrix& w, IntTensor& out, std::size_t row_begin,
               std::size_t row_end) {
  const std::size_t n = x.cols();
  const int act_bits = x.bits();
  const int weight_bits = w.bits();
  for (std::size_t p = row_begin; p < row_end; ++p) {
    for (std::size_t q = 0; q < w.rows(); ++q) {
      std::int64_t acc = 0;
      for (int m = 1; m <= act_bits; ++m) {
        const std::uint64_t* xp = x.plane(p, m);
        for (int k = 1; k <= weight_bits; ++k) {
          acc += (std::int64_t{1} << (m + k - 2)) * xnor_popcount(xp, w.plane(q, k), n);
        }
      }
      out(p, q) = acc;
    }
  }
}

}  // namespace

IntTensor encoded_gemm(const EncodedMatrix& x, const EncodedMatrix& w, std::size_t threads) {
  if (x.cols() != w.cols()) {
    throw ShapeError("encoded_gemm reduction mismatch: " + std::to_string(x.cols()) + " vs " +
                     std::to_string(w.cols()));
  }
  if (x.rows() == 0 || w.rows() == 0 || x.cols() == 0) throw ShapeError("encoded_gemm on empty matrix");
  // |acc| <= N (2^M - 1)(2^K - 1); keep two bits of headroom in int64.
  const unsigned __int128 bound = static_cast<unsigned __int128>(x.cols()) *
                                  static_cast<unsigned __int128>(odd_levels(x.bits())) *
                                  static_cast<unsigned __int128>(odd_levels(w.bits()));
  if (bound > (static_cast<unsigned __int128>(1) << 62)) throw ConfigError("encoded_gemm accumulator could overflow");

  IntTensor out({x.rows(), w.rows()});
  threads = std::clamp<std::size_t>(threads, 1, x.rows());
  if (threads == 1) {
    gemm_rows(x, w, out, 0, x.rows());
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (x.rows() + threads - 1) / threads;
  for (std::size_t begin = 0; begin < x.rows(); begin += chunk) {
    const std::size_t end = std::min(begin + chunk, x.rows());
    pool.emplace_back([&, begin, end] { gemm_rows(x, w, out, begin, end); });
  }
  return out;
}

Tensor scale_output(const IntTensor& acc, int act_bits, int weight_bits, double r) {
  check_bits(act_bits);
  check_bits(weight_bits);
  const double factor = r / static_cast<double>(odd_levels(act_bits) * odd_levels(weight_bits));
  Tensor out(acc.shape());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<double>(acc[i]) * factor;
  return out;
}

Tensor quantized_gemm(const Tensor& x, const Tensor& w, int act_bits, int weight_bits, double r,
                      std::size_t threads) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0)) {
    throw ShapeError("quantized_gemm dim mismatch: " + shape_string(x.shape()) + " x " + shape_string(w.shape()));
  }
  const Tensor wt = Tensor::from_matrix(w.matrix().transpose());
  const auto ex = EncodedMatrix::from_codes(quantize_odd(x, act_bits));
  const auto ew = EncodedMatrix::from_codes(quantize_odd(wt, weight_bits));
  return scale_output(encoded_gemm(ex, ew, threads), act_bits, weight_bits, r);
}

IntTensor integer_gemm(const IntTensor& x, const IntTensor& w) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1)) {
    throw ShapeError("integer_gemm dim mismatch: " + shape_string(x.shape()) + " x " + shape_string(w.shape()) + "^T");
  }
  IntTensor out({x.dim(0), w.dim(0)});
  for (std::size_t p = 0; p < x.dim(0); ++p) {
    for (std::size_t q = 0; q < w.dim(0); ++q) {
      std::int64_t acc = 0;
      for (std::size_t n = 0; n < x.dim(1); ++n) acc += x(p, n) * w(q, n);
      out(p, q) = acc;
    }
  }
  return out;
}

}  // namespace mbbn
