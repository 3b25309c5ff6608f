#include "mbbn/nn/layers.hpp"

#include <cmath>
#include <string>

#include "mbbn/gemm/encoded_gemm.hpp"

namespace mbbn::nn {

ConvGeometry conv_geometry(const Shape& input, const LayerSpec& spec) {
  if (input.size() != 4) throw ShapeError("conv2d expects a B x C x H x W input, got " + shape_string(input));
  if (input[1] != spec.in) {
    throw ShapeError("conv2d expects " + std::to_string(spec.in) + " channels, got " + std::to_string(input[1]));
  }
  ConvGeometry g{input[1], input[2], input[3], spec.kernel_h, spec.kernel_w, spec.stride, spec.padding};
  if (g.stride == 0 || g.kernel_h == 0 || g.kernel_w == 0 || g.height + 2 * g.padding < g.kernel_h ||
      g.width + 2 * g.padding < g.kernel_w) {
    throw ShapeError("conv2d kernel " + std::to_string(g.kernel_h) + "x" + std::to_string(g.kernel_w) +
                     " does not fit input " + shape_string(input) + " with padding " + std::to_string(g.padding));
  }
  return g;
}

Tensor im2col(const Tensor& x, const ConvGeometry& g) {
  const std::size_t batch = x.dim(0);
  const std::size_t oh = g.out_height();
  const std::size_t ow = g.out_width();
  Tensor cols({batch * oh * ow, g.patch_size()});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t row = (b * oh + oy) * ow + ox;
        std::size_t col = 0;
        for (std::size_t c = 0; c < g.channels; ++c)
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++col) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
              if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) && ix < static_cast<std::ptrdiff_t>(g.width)) {
                cols(row, col) = x(b, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
            }
      }
  return cols;
}

Tensor col2im(const Tensor& cols, std::size_t batch, const ConvGeometry& g) {
  const std::size_t oh = g.out_height();
  const std::size_t ow = g.out_width();
  Tensor x({batch, g.channels, g.height, g.width});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t row = (b * oh + oy) * ow + ox;
        std::size_t col = 0;
        for (std::size_t c = 0; c < g.channels; ++c)
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++col) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.padding);
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.padding);
              if (iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) && ix < static_cast<std::ptrdiff_t>(g.width)) {
                x(b, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) += cols(row, col);
              }
            }
      }
  return x;
}

Tensor rows_to_nchw(const Tensor& rows, std::size_t batch, std::size_t out_h, std::size_t out_w) {
  const std::size_t channels = rows.dim(1);
  Tensor y({batch, channels, out_h, out_w});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t oy = 0; oy < out_h; ++oy)
      for (std::size_t ox = 0; ox < out_w; ++ox)
        for (std::size_t c = 0; c < channels; ++c) y(b, c, oy, ox) = rows((b * out_h + oy) * out_w + ox, c);
  return y;
}

Tensor nchw_to_rows(const Tensor& x) {
  const std::size_t batch = x.dim(0), channels = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor rows({batch * h * w, channels});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) rows((b * h + y) * w + xx, c) = x(b, c, y, xx);
  return rows;
}

namespace {

IntTensor code_matrix(const QuantizedTensor& q) {
  IntTensor m(q.shape);
  for (std::size_t i = 0; i < q.size(); ++i) m[i] = q.codes[i];
  return m;
}

Tensor scaled(const IntTensor& acc, double scale) {
  Tensor y(acc.shape());
  for (std::size_t i = 0; i < acc.size(); ++i) y[i] = static_cast<double>(acc[i]) * scale;
  return y;
}

}  // namespace

double output_scale(const LayerSpec& spec, Stage stage, double act_step, double weight_step) {
  if (spec.follows_bn) return 1.0;
  if (stage == Stage::decomposed || spec.grid == GridKind::odd) {
    return spec.r / static_cast<double>(odd_levels(spec.act_bits) * odd_levels(spec.weight_bits));
  }
  return spec.r * act_step * weight_step;
}

Tensor linear_rows(const Tensor& rows, const LayerState& layer, Stage stage, std::size_t threads) {
  const LayerSpec& spec = layer.spec;
  if (rows.rank() != 2 || rows.dim(1) != spec.fan_in()) {
    throw ShapeError("layer expects rows of " + std::to_string(spec.fan_in()) + " features, got " + shape_string(rows.shape()));
  }
  const Stage effective = spec.full_precision ? Stage::full : stage;
  switch (effective) {
    case Stage::full: {
      const auto* w = std::get_if<Tensor>(&layer.weight);
      if (!w) throw StageError("float stage needs float weights");
      if (w->rank() == 3) {
        // Plane masters: continuous relaxation sum_k 2^(k-1) W^k / (2^K - 1).
        Tensor eff({spec.out, spec.fan_in()});
        const std::size_t n = eff.size();
        for (int k = 0; k < spec.weight_bits; ++k)
          for (std::size_t i = 0; i < n; ++i) eff[i] += static_cast<double>(1 << k) * (*w)[static_cast<std::size_t>(k) * n + i];
        eff.storage() /= static_cast<double>(odd_levels(spec.weight_bits));
        return matmul_transposed(rows, eff);
      }
      return matmul_transposed(rows, *w);
    }
    case Stage::quantized: {
      const auto* qw = std::get_if<QuantizedTensor>(&layer.weight);
      if (!qw) throw StageError("quantized stage needs quantized weights");
      const QuantizedTensor qx = quantize(rows, spec.grid, spec.act_bits, layer.act_t);
      const IntTensor acc = integer_gemm(code_matrix(qx), code_matrix(*qw));
      return scaled(acc, output_scale(spec, Stage::quantized, qx.d, qw->d));
    }
    case Stage::decomposed: {
      const auto* ew = std::get_if<EncodedMatrix>(&layer.weight);
      if (!ew) throw StageError("decomposed stage needs bit-plane weights");
      const auto ex = EncodedMatrix::from_codes(quantize_odd(rows, spec.act_bits));
      return scaled(encoded_gemm(ex, *ew, threads), output_scale(spec, Stage::decomposed, 0.0, 0.0));
    }
  }
  throw StageError("unknown stage");
}

namespace {

void add_bias(Tensor& rows, const Tensor& bias) {
  if (bias.empty()) return;
  rows.matrix().rowwise() += bias.storage().transpose();
}

}  // namespace

Tensor dense_forward(const Tensor& x, const LayerState& layer, Stage stage, std::size_t threads) {
  if (x.rank() < 2) throw ShapeError("dense expects a batch of inputs, got " + shape_string(x.shape()));
  const std::size_t batch = x.dim(0);
  const std::size_t features = x.size() / batch;
  if (features != layer.spec.in) {
    throw ShapeError("dense expects " + std::to_string(layer.spec.in) + " inputs, got " + std::to_string(features));
  }
  Tensor y = linear_rows(x.reshaped({batch, features}), layer, stage, threads);
  add_bias(y, layer.bias);
  return y;
}

Tensor conv2d_forward(const Tensor& x, const LayerState& layer, Stage stage, std::size_t threads) {
  const ConvGeometry g = conv_geometry(x.shape(), layer.spec);
  Tensor rows = linear_rows(im2col(x, g), layer, stage, threads);
  add_bias(rows, layer.bias);
  return rows_to_nchw(rows, x.dim(0), g.out_height(), g.out_width());
}

Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                         const Tensor& var, double eps) {
  if (x.rank() != 2 && x.rank() != 4) throw ShapeError("batchnorm expects rank 2 or 4 input");
  const std::size_t channels = x.dim(1);
  for (const Tensor* t : {&gamma, &beta, &mean, &var}) {
    if (t->shape() != Shape{channels}) throw ShapeError("batchnorm parameters must have " + std::to_string(channels) + " entries");
  }
  const std::size_t inner = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  Tensor y = x;
  for (std::size_t b = 0; b < x.dim(0); ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const double scale = gamma[c] / std::sqrt(var[c] + eps);
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t idx = (b * channels + c) * inner + i;
        y[idx] = (x[idx] - mean[c]) * scale + beta[c];
      }
    }
  y.check_finite();
  return y;
}

Tensor layer_forward(const Tensor& x, const LayerState& layer, Stage stage, std::size_t threads) {
  switch (layer.spec.kind) {
    case LayerKind::dense:
      return dense_forward(x, layer, stage, threads);
    case LayerKind::conv2d:
      return conv2d_forward(x, layer, stage, threads);
    case LayerKind::batchnorm:
      return batchnorm_forward(x, layer.bn.gamma, layer.bn.beta, layer.bn.mean, layer.bn.var, layer.spec.eps);
    case LayerKind::activation:
      return activation(x, layer.spec.activation);
  }
  throw ConfigError("unknown layer kind");
}

Tensor model_forward(const ModelState& model, const Tensor& x, std::size_t threads) {
  validate(model);
  Tensor a = x;
  for (const auto& layer : model.layers) a = layer_forward(a, layer, model.stage, threads);
  return a;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.dim(0));
  const auto m = logits.flat_rows();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    m.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace mbbn::nn
