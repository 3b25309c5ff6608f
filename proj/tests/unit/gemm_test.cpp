#include "doctest.h"

#include "mbbn/gemm/encoded_gemm.hpp"
#include "mbbn/gemm/zero_one.hpp"

using namespace mbbn;

namespace {

// Random odd codes as an integer matrix, alongside their encoded form.
struct RandomCodes {
  IntTensor codes;
  EncodedMatrix encoded;
};

RandomCodes random_codes(std::size_t rows, std::size_t cols, int bits, Rng& rng) {
  const Tensor x = Tensor::uniform({rows, cols}, {-1.0, 1.0}, rng);
  const auto q = quantize_odd(x, bits);
  IntTensor codes({rows, cols});
  for (std::size_t i = 0; i < q.size(); ++i) codes[i] = q.codes[i];
  return {codes, EncodedMatrix::from_codes(q)};
}

}  // namespace

TEST_CASE("one-bit gemm is a single xnor popcount") {
  Rng rng(1);
  const auto x = random_codes(1, 100, 1, rng);
  const auto w = random_codes(1, 100, 1, rng);
  const IntTensor acc = encoded_gemm(x.encoded, w.encoded);
  CHECK(acc[0] == xnor_popcount_dot(x.encoded.row_plane(0, 1), w.encoded.row_plane(0, 1)));
}

TEST_CASE("two-bit single element expands to four branches") {
  const auto x = EncodedMatrix::from_codes(quantize_odd(Tensor({1, 1}, 1.0 / 3.0), 2));
  const auto w = EncodedMatrix::from_codes(quantize_odd(Tensor({1, 1}, 1.0), 2));
  CHECK(x.code(0, 0) == 1);
  CHECK(w.code(0, 0) == 3);
  // (c1, c2) = (-1, +1), (d1, d2) = (+1, +1):
  // 1*(-1*1) + 2*(1*1) + 2*(-1*1) + 4*(1*1) = 3 = code_x * code_w.
  CHECK(encoded_gemm(x, w)[0] == 3);
}

TEST_CASE("encoded gemm equals integer code matmul") {
  Rng rng(2);
  SUBCASE("fixed case") {
    const auto x = random_codes(5, 130, 3, rng);
    const auto w = random_codes(4, 130, 2, rng);
    CHECK(encoded_gemm(x.encoded, w.encoded) == integer_gemm(x.codes, w.codes));
  }
  SUBCASE("sweep over precisions and awkward sizes") {
    for (int m = 1; m <= 8; ++m)
      for (int k = 1; k <= 8; ++k) {
        const std::size_t p = 1 + rng.below(6);
        const std::size_t n = 1 + rng.below(96);
        const std::size_t q = 1 + rng.below(6);
        const auto x = random_codes(p, n, m, rng);
        const auto w = random_codes(q, n, k, rng);
        REQUIRE(encoded_gemm(x.encoded, w.encoded) == integer_gemm(x.codes, w.codes));
      }
  }
  SUBCASE("threaded rows match") {
    const auto x = random_codes(13, 200, 2, rng);
    const auto w = random_codes(7, 200, 3, rng);
    CHECK(encoded_gemm(x.encoded, w.encoded, 4) == encoded_gemm(x.encoded, w.encoded, 1));
  }
  SUBCASE("additive over row blocks") {
    const auto top = random_codes(3, 70, 2, rng);
    const auto w = random_codes(4, 70, 2, rng);
    const IntTensor whole = encoded_gemm(top.encoded, w.encoded);
    for (std::size_t r = 0; r < 3; ++r) {
      IntTensor row({1, 70});
      for (std::size_t c = 0; c < 70; ++c) row(0, c) = top.codes(r, c);
      const auto qr = [&] {
        QuantizedTensor q{{1, 70}, {}, 2, 1.0, 1.0 / 3.0, GridKind::odd};
        for (std::size_t c = 0; c < 70; ++c) q.codes.push_back(static_cast<std::int32_t>(row(0, c)));
        return q;
      }();
      const IntTensor part = encoded_gemm(EncodedMatrix::from_codes(qr), w.encoded);
      for (std::size_t q = 0; q < 4; ++q) CHECK(part(0, q) == whole(r, q));
    }
  }
  SUBCASE("mismatch") {
    const auto x = random_codes(2, 10, 2, rng);
    const auto w = random_codes(2, 11, 2, rng);
    CHECK_THROWS_AS(encoded_gemm(x.encoded, w.encoded), ShapeError);
  }
}

TEST_CASE("encoded matrix conversions") {
  Rng rng(3);
  const auto x = random_codes(3, 70, 3, rng);
  CHECK(x.encoded.codes() == x.codes);
  CHECK(EncodedMatrix::from_encoded(x.encoded.to_encoded()) == x.encoded);
  std::vector<Tensor> planes;
  for (int m = 1; m <= 3; ++m) {
    Tensor p({3, 70});
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 70; ++c) p(r, c) = x.encoded.digit(r, c, m);
    planes.push_back(p);
  }
  CHECK(EncodedMatrix::from_planes(planes) == x.encoded);
}

TEST_CASE("output scale") {
  IntTensor acc({1, 1}, std::int64_t{9});
  CHECK(scale_output(acc, 2, 2)[0] == 1.0);
  CHECK(scale_output(IntTensor({1}, std::int64_t{1}), 2, 2)[0] == doctest::Approx(1.0 / 9.0));
  CHECK(scale_output(IntTensor({1}, std::int64_t{5}), 1, 1)[0] == 5.0);
  CHECK(scale_output(IntTensor({1}, std::int64_t{9}), 2, 2, 2.0)[0] == 2.0);
}

TEST_CASE("quantized gemm") {
  CHECK(quantized_gemm(Tensor({1, 1}, 1.0), Tensor({1, 1}, 1.0), 2, 2)[0] == 1.0);

  const Tensor x({1, 2}, std::vector<double>{1.0 / 3.0, -1.0});
  const Tensor w({2, 1}, std::vector<double>{1.0, -1.0 / 3.0});
  CHECK(quantized_gemm(x, w, 2, 2)[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  Rng rng(5);
  const Tensor xr = Tensor::uniform({4, 9}, {}, rng);
  const Tensor ones = Tensor::full({9, 3}, 1.0);
  const Tensor y = quantized_gemm(xr, ones, 3, 2);
  const Tensor xq = quantize_odd(xr, 3).dequantize();
  for (std::size_t r = 0; r < 4; ++r) {
    double rowsum = 0.0;
    for (std::size_t c = 0; c < 9; ++c) rowsum += xq(r, c);
    for (std::size_t q = 0; q < 3; ++q) CHECK(y(r, q) == doctest::Approx(rowsum).epsilon(1e-12));
  }
}

TEST_CASE("binary quantized gemm equals float matmul of signs") {
  Rng rng(6);
  const Tensor x = Tensor::uniform({5, 33}, {}, rng);
  const Tensor w = Tensor::uniform({33, 4}, {}, rng);
  auto sign = [](const Tensor& t) { return map(t, [](double v) { return v > 0.0 ? 1.0 : -1.0; }); };
  CHECK(quantized_gemm(x, w, 1, 1) == matmul(sign(x), sign(w)));
}

TEST_CASE("zero-one scheme") {
  SUBCASE("scalar products") {
    CHECK(zero_one_product(1.0, 1.0, 2, 2) == doctest::Approx(1.0));
    CHECK(zero_one_product(1.0 / 3.0, -1.0 / 3.0, 2, 2) == doctest::Approx(-1.0 / 9.0));
    CHECK(pm_one_product(1.0 / 3.0, -1.0 / 3.0, 2, 2) == doctest::Approx(-1.0 / 9.0));
    CHECK(zero_one_product(-1.0, -1.0, 1, 1) == doctest::Approx(1.0));
    CHECK_THROWS_AS(zero_one_product(0.5, 1.0, 2, 2), DomainError);
    CHECK_THROWS_AS(zero_one_product(0.0, 1.0, 2, 2), DomainError);
  }
  SUBCASE("both encodings agree on every grid pair") {
    for (int m = 1; m <= 4; ++m)
      for (int k = 1; k <= 4; ++k)
        for (std::int64_t a = -odd_levels(m); a <= odd_levels(m); a += 2)
          for (std::int64_t b = -odd_levels(k); b <= odd_levels(k); b += 2) {
            const double xq = static_cast<double>(a) / static_cast<double>(odd_levels(m));
            const double wq = static_cast<double>(b) / static_cast<double>(odd_levels(k));
            CHECK(std::abs(zero_one_product(xq, wq, m, k) - pm_one_product(xq, wq, m, k)) < 1e-12);
          }
  }
  SUBCASE("and-popcount gemm on unsigned integers") {
    Rng rng(7);
    IntTensor x({3, 70}), w({2, 70});
    for (auto& v : x.values()) v = static_cast<std::int64_t>(rng.below(8));
    for (auto& v : w.values()) v = static_cast<std::int64_t>(rng.below(4));
    CHECK(zero_one_gemm(x, w, 3, 2) == integer_gemm(x, w));
    x[0] = 8;
    CHECK_THROWS_AS(zero_one_gemm(x, w, 3, 2), DomainError);
  }
  SUBCASE("odd codes via the zero-one route") {
    Rng rng(8);
    for (int m = 1; m <= 5; ++m) {
      const auto xq = quantize_odd(Tensor::uniform({4, 77}, {}, rng), m);
      const auto wq = quantize_odd(Tensor::uniform({3, 77}, {}, rng), 6 - m);
      const auto oracle = odd_gemm_via_zero_one(xq, wq);
      CHECK(encoded_gemm(EncodedMatrix::from_codes(xq), EncodedMatrix::from_codes(wq)) == oracle);
    }
  }
}
