#include "mbbn/gemm/zero_one.hpp"

#include <bit>
#include <cmath>
#include <string>
#include <vector>

#include "mbbn/bitops/bitplane.hpp"

namespace mbbn {
namespace {

// [row][plane][word] planes of plain binary bits.
std::vector<std::uint64_t> unsigned_planes(const IntTensor& x, int bits, std::size_t wpr) {
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const std::int64_t limit = std::int64_t{1} << bits;
  std::vector<std::uint64_t> planes(rows * static_cast<std::size_t>(bits) * wpr, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::int64_t v = x(r, c);
      if (v < 0 || v >= limit) throw DomainError("zero_one_gemm: value " + std::to_string(v) + " outside [0, 2^bits)");
      for (int m = 0; m < bits; ++m) {
        if ((v >> m) & 1) planes[(r * static_cast<std::size_t>(bits) + static_cast<std::size_t>(m)) * wpr + c / kWordBits] |= std::uint64_t{1} << (c % kWordBits);
      }
    }
  }
  return planes;
}

std::int64_t grid_integer(double value, int bits) {
  const double scaled = value * static_cast<double>(odd_levels(bits));
  const double rounded = std::round(scaled);
  const auto v = static_cast<std::int64_t>(rounded);
  if (std::abs(scaled - rounded) > 1e-9 || v % 2 == 0 || std::abs(v) > odd_levels(bits)) {
    throw DomainError("value " + std::to_string(value) + " is not on the " + std::to_string(bits) + "-bit odd grid");
  }
  return v;
}

}  // namespace

IntTensor zero_one_gemm(const IntTensor& x, const IntTensor& w, int act_bits, int weight_bits) {
  check_bits(act_bits);
  check_bits(weight_bits);
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1)) throw ShapeError("zero_one_gemm dim mismatch");
  const std::size_t n = x.dim(1);
  const std::size_t wpr = words_for(n);
  const auto xp = unsigned_planes(x, act_bits, wpr);
  const auto wp = unsigned_planes(w, weight_bits, wpr);
  IntTensor out({x.dim(0), w.dim(0)});
  for (std::size_t p = 0; p < x.dim(0); ++p) {
    for (std::size_t q = 0; q < w.dim(0); ++q) {
      std::int64_t acc = 0;
      for (int m = 0; m < act_bits; ++m) {
        const std::uint64_t* a = &xp[(p * static_cast<std::size_t>(act_bits) + static_cast<std::size_t>(m)) * wpr];
        for (int k = 0; k < weight_bits; ++k) {
          const std::uint64_t* b = &wp[(q * static_cast<std::size_t>(weight_bits) + static_cast<std::size_t>(k)) * wpr];
          std::int64_t count = 0;
          for (std::size_t i = 0; i < wpr; ++i) count += std::popcount(a[i] & b[i]);
          acc += (std::int64_t{1} << (m + k)) * count;
        }
      }
      out(p, q) = acc;
    }
  }
  return out;
}

IntTensor odd_gemm_via_zero_one(const QuantizedTensor& x, const QuantizedTensor& w) {
  if (x.grid != GridKind::odd || w.grid != GridKind::odd) throw DomainError("odd_gemm_via_zero_one needs odd-grid codes");
  if (x.shape.size() != 2 || w.shape.size() != 2 || x.shape[1] != w.shape[1]) {
    throw ShapeError("odd_gemm_via_zero_one dim mismatch");
  }
  const std::int64_t lx = odd_levels(x.bits);
  const std::int64_t lw = odd_levels(w.bits);
  auto to_unsigned = [](const QuantizedTensor& q, std::int64_t levels) {
    IntTensor u(q.shape);
    for (std::size_t i = 0; i < q.size(); ++i) u[i] = (q.codes[i] + levels) / 2;
    return u;
  };
  const IntTensor ux = to_unsigned(x, lx);
  const IntTensor uw = to_unsigned(w, lw);
  const IntTensor ab = zero_one_gemm(ux, uw, x.bits, w.bits);
  const std::size_t n = x.shape[1];
  IntTensor out(ab.shape());
  for (std::size_t p = 0; p < ab.dim(0); ++p) {
    const std::int64_t sum_a = ux.flat_rows().row(static_cast<Eigen::Index>(p)).sum();
    for (std::size_t q = 0; q < ab.dim(1); ++q) {
      const std::int64_t sum_b = uw.flat_rows().row(static_cast<Eigen::Index>(q)).sum();
      out(p, q) = 4 * ab(p, q) - 2 * lw * sum_a - 2 * lx * sum_b + static_cast<std::int64_t>(n) * lx * lw;
    }
  }
  return out;
}

double zero_one_product(double xq, double wq, int act_bits, int weight_bits) {
  check_bits(act_bits);
  check_bits(weight_bits);
  const auto lx = static_cast<double>(odd_levels(act_bits));
  const auto lw = static_cast<double>(odd_levels(weight_bits));
  const double ux = static_cast<double>((grid_integer(xq, act_bits) + odd_levels(act_bits)) / 2);
  const double uw = static_cast<double>((grid_integer(wq, weight_bits) + odd_levels(weight_bits)) / 2);
  return 4.0 / (lx * lw) * ux * uw - 2.0 / lx * ux - 2.0 / lw * uw + 1.0;
}

double pm_one_product(double xq, double wq, int act_bits, int weight_bits) {
  check_bits(act_bits);
  check_bits(weight_bits);
  const auto vx = static_cast<double>(grid_integer(xq, act_bits));
  const auto vw = static_cast<double>(grid_integer(wq, weight_bits));
  return vx * vw / static_cast<double>(odd_levels(act_bits) * odd_levels(weight_bits));
}

}  // namespace mbbn
