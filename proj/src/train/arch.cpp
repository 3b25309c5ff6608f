#include "mbbn/train/arch.hpp"

#include <charconv>
#include <string>
#include <vector>

#include "mbbn/nn/layers.hpp"

namespace mbbn::train {

namespace {

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return parts;
    start = pos + 1;
  }
}

std::size_t number(std::string_view s, std::string_view arch) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || v == 0) {
    throw ConfigError("bad number '" + std::string(s) + "' in architecture '" + std::string(arch) + "'");
  }
  return v;
}

// c<out>k<kernel>s<stride>p<pad>; stride and pad are optional (1 and 0).
nn::LayerState conv_layer(std::string_view token, std::size_t in_channels, const ArchOptions& o, std::string_view arch) {
  if (token.empty() || token[0] != 'c') throw ConfigError("conv layer '" + std::string(token) + "' must start with 'c'");
  std::size_t out = 0, kernel = 0, stride = 1, pad = 0;
  std::size_t i = 1;
  char field = 'c';
  while (i <= token.size()) {
    std::size_t j = i;
    while (j < token.size() && token[j] >= '0' && token[j] <= '9') ++j;
    const std::string_view digits = token.substr(i, j - i);
    std::size_t v = 0;
    if (field == 'p') {
      const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (digits.empty() || res.ec != std::errc()) throw ConfigError("bad padding in '" + std::string(token) + "'");
    } else {
      v = number(digits, arch);
    }
    switch (field) {
      case 'c': out = v; break;
      case 'k': kernel = v; break;
      case 's': stride = v; break;
      case 'p': pad = v; break;
      default: throw ConfigError("unknown conv field '" + std::string(1, field) + "' in '" + std::string(token) + "'");
    }
    if (j == token.size()) break;
    field = token[j];
    i = j + 1;
  }
  if (kernel == 0) throw ConfigError("conv layer '" + std::string(token) + "' needs a kernel size");
  return nn::make_conv2d(in_channels, out, kernel, stride, pad, o.act_bits, o.weight_bits);
}

}  // namespace

nn::ModelState build_arch(std::string_view arch, const ArchOptions& o) {
  check_bits(o.act_bits);
  check_bits(o.weight_bits);
  nn::ModelState model;
  model.algorithm = model_algorithm(o.algorithm);
  const auto parts = split_on(arch, ':');
  if (parts[0] == "mlp" && parts.size() == 2) {
    const auto widths = split_on(parts[1], '-');
    if (widths.size() < 2) throw ConfigError("mlp needs at least an input and an output width");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      model.layers.push_back(nn::make_dense(number(widths[i], arch), number(widths[i + 1], arch), o.act_bits, o.weight_bits));
      if (i + 2 < widths.size()) model.layers.push_back(nn::make_activation(ActivationKind::htanh));
    }
  } else if (parts[0] == "cnn" && parts.size() == 4) {
    const auto dims = split_on(parts[1], 'x');
    if (dims.size() != 3) throw ConfigError("cnn input must be CxHxW");
    Shape shape{1, number(dims[0], arch), number(dims[1], arch), number(dims[2], arch)};
    for (auto token : split_on(parts[2], ',')) {
      auto layer = conv_layer(token, shape[1], o, arch);
      const auto g = nn::conv_geometry(shape, layer.spec);
      shape = {1, layer.spec.out, g.out_height(), g.out_width()};
      model.layers.push_back(std::move(layer));
      model.layers.push_back(nn::make_activation(ActivationKind::htanh));
    }
    model.layers.push_back(nn::make_dense(shape[1] * shape[2] * shape[3], number(parts[3], arch), o.act_bits, o.weight_bits));
  } else {
    throw ConfigError("unknown architecture '" + std::string(arch) + "' (expected mlp:a-b-... or cnn:CxHxW:convs:classes)");
  }

  std::vector<nn::LayerState*> weights;
  for (auto& layer : model.layers) {
    if (!layer.spec.is_linear()) continue;
    layer.spec.grid = o.grid;
    weights.push_back(&layer);
  }
  if (o.input_bits != 0) {
    check_bits(o.input_bits);
    weights.front()->spec.act_bits = o.input_bits;
  }
  if (o.float_first) weights.front()->spec.full_precision = true;
  if (o.float_last) weights.back()->spec.full_precision = true;
  for (auto* layer : weights) {
    if (o.algorithm == TrainAlgorithm::mbbn && !layer->spec.full_precision) {
      if (o.grid != GridKind::odd) throw ConfigError("mbbn training needs the odd grid");
      layer->spec.plane_weights = true;
      layer->weight = Tensor({static_cast<std::size_t>(o.weight_bits), layer->spec.out, layer->spec.fan_in()});
    }
  }
  nn::validate(model);
  return model;
}

}  // namespace mbbn::train
