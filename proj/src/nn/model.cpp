#include "mbbn/nn/model.hpp"

#include "mbbn/quant/encoder.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <optional>

namespace mbbn::nn {
namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view name, const std::array<Enum, N>& all, std::string_view what) {
  for (Enum e : all) {
    if (to_string(e) == name) return e;
  }
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(name) + "'");
}

Shape expected_weight_shape(const LayerSpec& spec, Stage stage) {
  if (spec.plane_weights && !spec.full_precision && stage == Stage::full) {
    return {static_cast<std::size_t>(spec.weight_bits), spec.out, spec.fan_in()};
  }
  return {spec.out, spec.fan_in()};
}

void check_linear(const LayerState& layer, Stage stage, std::size_t index) {
  const LayerSpec& spec = layer.spec;
  const std::string where = "layer " + std::to_string(index) + " (" + std::string(to_string(spec.kind)) + ")";
  if (spec.in == 0 || spec.out == 0) throw ShapeError(where + ": zero feature count");
  if (spec.kind == LayerKind::conv2d && (spec.kernel_h == 0 || spec.kernel_w == 0 || spec.stride == 0)) {
    throw ShapeError(where + ": invalid conv geometry");
  }
  if (spec.is_quantized()) {
    check_bits(spec.act_bits);
    check_bits(spec.weight_bits);
    if (spec.plane_weights && spec.grid != GridKind::odd) throw ConfigError(where + ": plane weights need the odd grid");
  }
  if (spec.full_precision && spec.plane_weights) throw ConfigError(where + ": plane weights cannot be full precision");

  const Shape want = expected_weight_shape(spec, stage);
  const Stage effective = spec.full_precision ? Stage::full : stage;
  switch (effective) {
    case Stage::full: {
      const auto* w = std::get_if<Tensor>(&layer.weight);
      if (!w) throw StageError(where + ": expected float weights for stage " + std::string(to_string(stage)));
      if (w->shape() != want) throw ShapeError(where + ": weight shape " + shape_string(w->shape()) + ", expected " + shape_string(want));
      break;
    }
    case Stage::quantized: {
      const auto* q = std::get_if<QuantizedTensor>(&layer.weight);
      if (!q) throw StageError(where + ": expected quantized weights");
      if (q->shape != want) throw ShapeError(where + ": weight shape " + shape_string(q->shape) + ", expected " + shape_string(want));
      if (q->bits != spec.weight_bits) throw StageError(where + ": weight codes have " + std::to_string(q->bits) + " bits, spec says " + std::to_string(spec.weight_bits));
      if (q->codes.size() != shape_numel(q->shape)) throw ShapeError(where + ": code count mismatch");
      break;
    }
    case Stage::decomposed: {
      const auto* e = std::get_if<EncodedMatrix>(&layer.weight);
      if (!e) throw StageError(where + ": expected bit-plane weights");
      if (e->rows() != spec.out || e->cols() != spec.fan_in()) throw ShapeError(where + ": encoded weight dims mismatch");
      if (e->bits() != spec.weight_bits) throw StageError(where + ": encoded weight bit count mismatch");
      break;
    }
  }
  if (spec.has_bias) {
    if (layer.bias.shape() != Shape{spec.out}) throw ShapeError(where + ": bias must have shape [" + std::to_string(spec.out) + "]");
  } else if (!layer.bias.empty()) {
    throw ShapeError(where + ": unexpected bias");
  }
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense:
      return "dense";
    case LayerKind::conv2d:
      return "conv2d";
    case LayerKind::batchnorm:
      return "batchnorm";
    case LayerKind::activation:
      return "activation";
  }
  return "dense";
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::full:
      return "float";
    case Stage::quantized:
      return "quantized";
    case Stage::decomposed:
      return "decomposed";
  }
  return "float";
}

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::none:
      return "none";
    case Algorithm::qnn:
      return "qnn";
    case Algorithm::mbbn:
      return "mbbn";
  }
  return "none";
}

LayerKind parse_layer_kind(std::string_view name) {
  return parse_enum(name, std::array{LayerKind::dense, LayerKind::conv2d, LayerKind::batchnorm, LayerKind::activation},
                    "layer kind");
}

Stage parse_stage(std::string_view name) {
  return parse_enum(name, std::array{Stage::full, Stage::quantized, Stage::decomposed}, "stage");
}

Algorithm parse_algorithm(std::string_view name) {
  return parse_enum(name, std::array{Algorithm::none, Algorithm::qnn, Algorithm::mbbn}, "algorithm");
}

void validate(const ModelState& model) {
  std::optional<std::size_t> features;  // channel/feature count flowing out of the last sized layer
  bool flat = true;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerState& layer = model.layers[i];
    const LayerSpec& spec = layer.spec;
    const std::string where = "layer " + std::to_string(i);
    switch (spec.kind) {
      case LayerKind::dense:
        check_linear(layer, model.stage, i);
        if (features && flat && *features != spec.in) {
          throw ShapeError(where + ": dense expects " + std::to_string(spec.in) + " inputs, previous layer emits " + std::to_string(*features));
        }
        features = spec.out;
        flat = true;
        break;
      case LayerKind::conv2d:
        check_linear(layer, model.stage, i);
        if (features && !flat && *features != spec.in) {
          throw ShapeError(where + ": conv expects " + std::to_string(spec.in) + " channels, previous layer emits " + std::to_string(*features));
        }
        if (features && flat) throw ShapeError(where + ": conv2d cannot follow a dense layer");
        features = spec.out;
        flat = false;
        break;
      case LayerKind::batchnorm: {
        if (!std::holds_alternative<std::monostate>(layer.weight)) throw StageError(where + ": batchnorm has no weight");
        const Shape want{spec.in};
        for (const Tensor* t : {&layer.bn.gamma, &layer.bn.beta, &layer.bn.mean, &layer.bn.var}) {
          if (t->shape() != want) throw ShapeError(where + ": batchnorm parameter length mismatch");
        }
        if (features && *features != spec.in) throw ShapeError(where + ": batchnorm channel mismatch");
        break;
      }
      case LayerKind::activation:
        if (!std::holds_alternative<std::monostate>(layer.weight)) throw StageError(where + ": activation has no weight");
        break;
    }
  }
}

LayerState make_dense(std::size_t in, std::size_t out, int act_bits, int weight_bits) {
  LayerState l;
  l.spec.kind = LayerKind::dense;
  l.spec.in = in;
  l.spec.out = out;
  l.spec.act_bits = act_bits;
  l.spec.weight_bits = weight_bits;
  l.weight = Tensor({out, in});
  l.bias = Tensor({out});
  return l;
}

LayerState make_conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                       std::size_t padding, int act_bits, int weight_bits) {
  LayerState l;
  l.spec.kind = LayerKind::conv2d;
  l.spec.in = in_channels;
  l.spec.out = out_channels;
  l.spec.kernel_h = kernel;
  l.spec.kernel_w = kernel;
  l.spec.stride = stride;
  l.spec.padding = padding;
  l.spec.act_bits = act_bits;
  l.spec.weight_bits = weight_bits;
  l.weight = Tensor({out_channels, l.spec.fan_in()});
  l.bias = Tensor({out_channels});
  return l;
}

LayerState make_activation(ActivationKind kind) {
  LayerState l;
  l.spec.kind = LayerKind::activation;
  l.spec.activation = kind;
  return l;
}

LayerState make_batchnorm(std::size_t channels, double eps) {
  LayerState l;
  l.spec.kind = LayerKind::batchnorm;
  l.spec.in = channels;
  l.spec.out = channels;
  l.spec.eps = eps;
  l.bn = {Tensor::full({channels}, 1.0), Tensor({channels}), Tensor({channels}), Tensor::full({channels}, 1.0)};
  return l;
}

void initialize(ModelState& model, Rng& rng, InitScheme scheme) {
  if (model.stage != Stage::full) throw StageError("initialize needs a float-stage model");
  for (auto& layer : model.layers) {
    const LayerSpec& spec = layer.spec;
    if (!spec.is_linear()) continue;
    const double fan_out = static_cast<double>(spec.out * (spec.kind == LayerKind::conv2d ? spec.kernel_h * spec.kernel_w : 1));
    const double limit =
        scheme == InitScheme::unit ? 1.0 : std::min(1.0, std::sqrt(6.0 / (static_cast<double>(spec.fan_in()) + fan_out)));
    Tensor w = Tensor::uniform(expected_weight_shape(spec, Stage::full), {-limit, limit}, rng);
    for (auto& v : w.values()) v = static_cast<float>(v);
    layer.weight = std::move(w);
    layer.bias = spec.has_bias ? Tensor({spec.out}) : Tensor();
  }
}

ModelState quantize_model(const ModelState& model) {
  if (model.stage != Stage::full) throw StageError("quantize needs a float-stage model, got " + std::string(to_string(model.stage)));
  validate(model);
  ModelState out = model;
  out.stage = Stage::quantized;
  for (auto& layer : out.layers) {
    const LayerSpec& spec = layer.spec;
    if (!spec.is_quantized()) continue;
    const Tensor& w = std::get<Tensor>(layer.weight);
    if (spec.plane_weights) {
      const std::size_t plane_size = spec.out * spec.fan_in();
      QuantizedTensor q{{spec.out, spec.fan_in()}, std::vector<std::int32_t>(plane_size, 0), spec.weight_bits, 1.0,
                        1.0 / static_cast<double>(odd_levels(spec.weight_bits)), GridKind::odd};
      for (int k = 0; k < spec.weight_bits; ++k) {
        for (std::size_t i = 0; i < plane_size; ++i) {
          q.codes[i] += (1 << k) * static_cast<std::int32_t>(binarize(w[static_cast<std::size_t>(k) * plane_size + i]));
        }
      }
      layer.weight = std::move(q);
    } else {
      layer.weight = quantize(w, spec.grid, spec.weight_bits, layer.weight_t);
    }
  }
  return out;
}

ModelState decompose_model(const ModelState& model) {
  if (model.stage != Stage::quantized) {
    throw StageError("decompose needs a quantized-stage model, got " + std::string(to_string(model.stage)));
  }
  validate(model);
  ModelState out = model;
  out.stage = Stage::decomposed;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    LayerState& layer = out.layers[i];
    if (!layer.spec.is_quantized()) continue;
    const auto& q = std::get<QuantizedTensor>(layer.weight);
    if (q.grid != GridKind::odd || layer.spec.grid != GridKind::odd) {
      const auto zeros = std::count(q.codes.begin(), q.codes.end(), 0);
      throw DecompositionError("layer " + std::to_string(i) + " uses the linear grid (" + std::to_string(zeros) +
                               " zero codes); only odd-grid codes have a {-1,+1} digit expansion");
    }
    layer.weight = EncodedMatrix::from_codes(q);
  }
  return out;
}

double compression_ratio(const ModelState& model) {
  double float_bits = 0.0;
  double packed_bits = 0.0;
  for (const auto& layer : model.layers) {
    if (!layer.spec.is_quantized()) continue;
    const double n = static_cast<double>(layer.spec.out * layer.spec.fan_in());
    float_bits += 32.0 * n;
    packed_bits += static_cast<double>(layer.spec.weight_bits) * n;
  }
  return packed_bits > 0.0 ? float_bits / packed_bits : 0.0;
}

std::string format_ratio(double ratio) {
  char buf[32];
  if (std::abs(ratio - std::round(ratio)) < 1e-9) {
    std::snprintf(buf, sizeof buf, "%.0fx", ratio);
  } else {
    std::snprintf(buf, sizeof buf, "%.1fx", ratio);
  }
  return buf;
}

}  // namespace mbbn::nn
