#include "doctest.h"

#include <sstream>

#include "mbbn/gemm/encoded_gemm.hpp"
#include "mbbn/nn/layers.hpp"
#include "mbbn/nn/model_io.hpp"

using namespace mbbn;
using namespace mbbn::nn;

namespace {

ModelState mlp(std::vector<std::size_t> widths, int m, int k, Rng& rng) {
  ModelState model;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    model.layers.push_back(make_dense(widths[i], widths[i + 1], m, k));
    if (i + 2 < widths.size()) model.layers.push_back(make_activation(ActivationKind::htanh));
  }
  initialize(model, rng);
  return model;
}

// Direct convolution: out[b][o][y][x] = sum_c sum_ky sum_kx w[o][c][ky][kx] in[b][c][y*s+ky-p][x*s+kx-p].
Tensor naive_conv(const Tensor& x, const Tensor& w, const LayerSpec& s) {
  const std::size_t batch = x.dim(0), h = x.dim(2), wd = x.dim(3);
  const std::size_t oh = (h + 2 * s.padding - s.kernel_h) / s.stride + 1;
  const std::size_t ow = (wd + 2 * s.padding - s.kernel_w) / s.stride + 1;
  Tensor y({batch, s.out, oh, ow});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < s.out; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (std::size_t c = 0; c < s.in; ++c)
            for (std::size_t ky = 0; ky < s.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < s.kernel_w; ++kx) {
                const long iy = static_cast<long>(oy * s.stride + ky) - static_cast<long>(s.padding);
                const long ix = static_cast<long>(ox * s.stride + kx) - static_cast<long>(s.padding);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                acc += w(o, (c * s.kernel_h + ky) * s.kernel_w + kx) * x(b, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
          y(b, o, oy, ox) = acc;
        }
  return y;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::string bytes_of(const ModelState& m) {
  std::ostringstream os;
  write_model(os, m);
  return os.str();
}

ModelState from_bytes(const std::string& s) {
  std::istringstream is(s);
  return read_model(is);
}

}  // namespace

TEST_CASE("names round trip") {
  CHECK(parse_stage("float") == Stage::full);
  CHECK(parse_stage("decomposed") == Stage::decomposed);
  CHECK(parse_algorithm("mbbn") == Algorithm::mbbn);
  CHECK(parse_layer_kind("conv2d") == LayerKind::conv2d);
  CHECK_THROWS_AS(parse_stage("binary"), ConfigError);
}

TEST_CASE("identity dense layer") {
  ModelState model;
  model.layers.push_back(make_dense(3, 3, 2, 2));
  model.layers[0].weight = Tensor::identity(3);
  const Tensor x({2, 3}, std::vector<double>{1.0 / 3.0, -1.0, 1.0, -1.0 / 3.0, 1.0 / 3.0, -1.0});
  CHECK(model_forward(model, x) == x);

  // The odd grid has no zero: off-diagonal entries become -1/3.
  const ModelState q = quantize_model(model);
  Tensor expect({2, 3});
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) expect(b, i) += x(b, j) * (i == j ? 1.0 : -1.0 / 3.0);
  CHECK(max_abs_diff(model_forward(q, x), expect) < 1e-15);
  const ModelState d = decompose_model(q);
  CHECK(max_abs_diff(model_forward(d, x), expect) < 1e-15);
}

TEST_CASE("quantized and decomposed stages agree") {
  Rng rng(11);
  for (int m = 1; m <= 4; ++m)
    for (int k = 1; k <= 4; ++k) {
      ModelState model = mlp({7, 70, 9, 3}, m, k, rng);
      model.layers[0].spec.r = 1.5;
      const Tensor x = Tensor::uniform({5, 7}, {}, rng);
      const ModelState q = quantize_model(model);
      const ModelState d = decompose_model(q);
      REQUIRE(max_abs_diff(model_forward(q, x), model_forward(d, x)) < 1e-9);
    }
}

TEST_CASE("layer followed by batch norm emits the raw accumulator") {
  Rng rng(12);
  ModelState model;
  model.layers.push_back(make_dense(20, 4, 3, 2));
  model.layers[0].spec.follows_bn = true;
  initialize(model, rng);
  const Tensor x = Tensor::uniform({3, 20}, {}, rng);
  const ModelState q = quantize_model(model);
  const ModelState d = decompose_model(q);
  const auto& qw = std::get<QuantizedTensor>(q.layers[0].weight);
  const IntTensor acc = encoded_gemm(EncodedMatrix::from_codes(quantize_odd(x, 3)), EncodedMatrix::from_codes(qw));
  const Tensor yd = model_forward(d, x);
  const Tensor yq = model_forward(q, x);
  for (std::size_t i = 0; i < acc.size(); ++i) {
    CHECK(yd[i] == static_cast<double>(acc[i]));
    CHECK(yq[i] == doctest::Approx(static_cast<double>(acc[i])).epsilon(1e-12));
  }
}

TEST_CASE("full precision layers stay float") {
  Rng rng(13);
  ModelState model = mlp({4, 6, 2}, 2, 2, rng);
  model.layers[0].spec.full_precision = true;
  const Tensor x = Tensor::uniform({3, 4}, {}, rng);
  const ModelState d = decompose_model(quantize_model(model));
  CHECK(std::holds_alternative<Tensor>(d.layers[0].weight));
  const Tensor h = activation(dense_forward(x, model.layers[0], Stage::full), ActivationKind::htanh);
  CHECK(max_abs_diff(model_forward(d, x), dense_forward(h, d.layers[2], Stage::decomposed)) < 1e-15);
}

TEST_CASE("convolution") {
  Rng rng(14);
  SUBCASE("im2col matches direct convolution") {
    for (auto [k, s, p] : {std::tuple{3u, 1u, 1u}, {3u, 2u, 0u}, {1u, 1u, 0u}, {5u, 2u, 2u}, {2u, 3u, 1u}}) {
      LayerState layer = make_conv2d(3, 4, k, s, p, 2, 2);
      layer.weight = Tensor::uniform({4, 3 * k * k}, {}, rng);
      layer.bias = Tensor({4});
      const Tensor x = Tensor::uniform({2, 3, 7, 6}, {}, rng);
      CHECK(max_abs_diff(conv2d_forward(x, layer, Stage::full), naive_conv(x, std::get<Tensor>(layer.weight), layer.spec)) < 1e-10);
    }
  }
  SUBCASE("all-ones kernel on a constant image") {
    LayerState layer = make_conv2d(1, 1, 3, 1, 0, 2, 2);
    layer.weight = Tensor::full({1, 9}, 1.0);
    const Tensor y = conv2d_forward(Tensor::full({1, 1, 5, 5}, 0.25), layer, Stage::full);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    for (double v : y.values()) CHECK(v == doctest::Approx(2.25));

    ModelState model;
    model.layers.push_back(layer);
    const ModelState d = decompose_model(quantize_model(model));
    const Tensor yd = model_forward(d, Tensor::full({1, 1, 5, 5}, 1.0 / 3.0));
    for (double v : yd.values()) CHECK(v == doctest::Approx(3.0));
  }
  SUBCASE("1x1 identity kernel passes channels through") {
    LayerState layer = make_conv2d(3, 3, 1, 1, 0, 2, 2);
    layer.weight = Tensor::identity(3);
    const Tensor x = Tensor::uniform({2, 3, 4, 4}, {}, rng);
    CHECK(conv2d_forward(x, layer, Stage::full) == x);
  }
  SUBCASE("col2im is the adjoint of im2col") {
    const ConvGeometry g{2, 5, 6, 3, 3, 2, 1};
    const Tensor x = Tensor::uniform({2, 2, 5, 6}, {}, rng);
    const Tensor c = Tensor::uniform({2 * g.out_height() * g.out_width(), g.patch_size()}, {}, rng);
    const Tensor cols = im2col(x, g);
    const Tensor back = col2im(c, 2, g);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) lhs += cols[i] * c[i];
    for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
  SUBCASE("rows and nchw layouts invert") {
    const Tensor x = Tensor::uniform({2, 3, 2, 4}, {}, rng);
    CHECK(rows_to_nchw(nchw_to_rows(x), 2, 2, 4) == x);
  }
  SUBCASE("kernel larger than input") {
    LayerState layer = make_conv2d(1, 1, 5, 1, 0, 2, 2);
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 1, 3, 3}), layer, Stage::full), ShapeError);
  }
  SUBCASE("decomposed conv matches quantized conv") {
    ModelState model;
    model.layers.push_back(make_conv2d(2, 5, 3, 1, 1, 3, 2));
    initialize(model, rng);
    const Tensor x = Tensor::uniform({2, 2, 6, 6}, {}, rng);
    const ModelState q = quantize_model(model);
    CHECK(max_abs_diff(model_forward(q, x), model_forward(decompose_model(q), x)) < 1e-9);
  }
}

TEST_CASE("batch norm") {
  const Tensor x({2, 2}, std::vector<double>{1.0, 2.0, 3.0, 4.0});
  const Tensor y = batchnorm_forward(x, Tensor({2}, std::vector<double>{2.0, 1.0}), Tensor({2}, std::vector<double>{0.5, 0.0}),
                                     Tensor({2}, std::vector<double>{1.0, 3.0}), Tensor({2}, std::vector<double>{4.0, 1.0}), 0.0);
  CHECK(y(0, 0) == doctest::Approx(0.5));
  CHECK(y(1, 0) == doctest::Approx(2.0 * 2.0 / 2.0 + 0.5));
  CHECK(y(0, 1) == doctest::Approx(-1.0));
  CHECK(y(1, 1) == doctest::Approx(1.0));

  const Tensor img = Tensor::full({1, 2, 2, 2}, 3.0);
  const Tensor z = batchnorm_forward(img, Tensor::full({2}, 1.0), Tensor({2}), Tensor::full({2}, 3.0), Tensor::full({2}, 1.0), 1e-5);
  for (double v : z.values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(batchnorm_forward(x, Tensor({3}), Tensor({2}), Tensor({2}), Tensor({2}), 0.0), ShapeError);
}

TEST_CASE("stage transitions") {
  Rng rng(15);
  ModelState model = mlp({4, 8, 2}, 2, 2, rng);
  CHECK_THROWS_AS(decompose_model(model), StageError);
  const ModelState q = quantize_model(model);
  CHECK_THROWS_AS(quantize_model(q), StageError);

  ModelState linear = model;
  for (auto& l : linear.layers) l.spec.grid = GridKind::linear;
  CHECK_THROWS_AS(decompose_model(quantize_model(linear)), DecompositionError);

  ModelState broken = q;
  broken.layers[0].weight = Tensor({8, 4});
  CHECK_THROWS_AS(validate(broken), StageError);
  broken = model;
  broken.layers[2].weight = Tensor({2, 9});
  CHECK_THROWS_AS(validate(broken), ShapeError);
}

TEST_CASE("plane weights quantize to the digit sum") {
  ModelState model;
  LayerState layer = make_dense(2, 1, 2, 2);
  layer.spec.plane_weights = true;
  layer.weight = Tensor({2, 1, 2}, std::vector<double>{0.3, -0.2, 0.7, 0.9});
  model.layers.push_back(layer);
  const ModelState quantized = quantize_model(model);
  const auto& q = std::get<QuantizedTensor>(quantized.layers[0].weight);
  CHECK(q.codes == std::vector<std::int32_t>{3, 1});
}

TEST_CASE("model files") {
  Rng rng(16);
  ModelState model;
  model.algorithm = Algorithm::qnn;
  model.layers.push_back(make_conv2d(1, 4, 3, 1, 1, 2, 3));
  model.layers.push_back(make_batchnorm(4));
  model.layers.push_back(make_activation(ActivationKind::htanh));
  model.layers.push_back(make_dense(4 * 5 * 5, 3, 2, 2));
  model.layers[0].spec.follows_bn = true;
  model.layers[3].spec.r = 0.1;
  model.layers[3].act_t = 0.75;
  initialize(model, rng);
  model.layers[1].bn.mean = Tensor::uniform({4}, {}, rng);

  const Tensor x = Tensor::uniform({2, 1, 5, 5}, {}, rng);
  for (Stage stage : {Stage::full, Stage::quantized, Stage::decomposed}) {
    CAPTURE(to_string(stage));
    const ModelState m = stage == Stage::full ? model
                         : stage == Stage::quantized ? quantize_model(from_bytes(bytes_of(model)))
                                                     : decompose_model(quantize_model(from_bytes(bytes_of(model))));
    const std::string bytes = bytes_of(m);
    const ModelState back = from_bytes(bytes);
    CHECK(bytes_of(back) == bytes);
    CHECK(back.stage == stage);
    CHECK(describe_layers(back) == describe_layers(m));
    if (stage != Stage::full) {
      CHECK(back == m);
      CHECK(model_forward(back, x) == model_forward(m, x));
    }
    CHECK(bytes.rfind("MBBN-MODEL 1\nstage=" + std::string(to_string(stage)) + "\n", 0) == 0);

    CHECK_THROWS_AS(from_bytes(bytes.substr(0, bytes.size() - 1)), IoError);
    CHECK_THROWS_AS(from_bytes(bytes + "x"), IoError);
    CHECK_THROWS_AS(from_bytes("MBBN-MODEL 2" + bytes.substr(12)), IoError);
  }
  CHECK_THROWS_AS(load_model("/nonexistent/dir/model.bin"), IoError);
}

TEST_CASE("compression accounting") {
  Rng rng(17);
  for (int k = 1; k <= 8; ++k) {
    ModelState model;
    model.layers.push_back(make_dense(64, 64, 2, k));
    model.layers.push_back(make_dense(64, 128, 2, k));
    initialize(model, rng);
    const ModelState d = decompose_model(quantize_model(model));
    CHECK(compression_ratio(d) == doctest::Approx(32.0 / k));
    CHECK(static_cast<double>(weight_payload_bytes(model)) / static_cast<double>(weight_payload_bytes(d)) ==
          doctest::Approx(32.0 / k));
  }
  CHECK(format_ratio(16.0) == "16x");
  CHECK(format_ratio(32.0 / 3.0) == "10.7x");
}

TEST_CASE("argmax") {
  const Tensor logits({2, 3}, std::vector<double>{0.1, 0.5, 0.5, 2.0, -1.0, 0.0});
  CHECK(argmax_rows(logits) == std::vector<int>{1, 0});
}
