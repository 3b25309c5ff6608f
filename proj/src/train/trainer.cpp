#include "mbbn/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mbbn/gemm/encoded_gemm.hpp"
#include "mbbn/nn/layers.hpp"
#include "mbbn/quant/encoder.hpp"

namespace mbbn::train {

using nn::LayerKind;
using nn::LayerState;
using nn::ModelState;

namespace {

struct LayerCache {
  Tensor input;
  // Linear layers: the GEMM input rows before quantization, the operand the
  // product actually used, and the effective weight matrix.
  Tensor rows;
  Tensor operand;
  Tensor weight;
  double scale = 1.0;
  // Quantized path: integer codes and the multiplier of their product.
  IntTensor x_codes;
  IntTensor w_codes;
  double code_scale = 1.0;
  nn::ConvGeometry geometry;
};

enum class Path { float_path, quantized, branches };

Path layer_path(const LayerState& layer, TrainAlgorithm algorithm) {
  if (algorithm == TrainAlgorithm::full || layer.spec.full_precision) return Path::float_path;
  return algorithm == TrainAlgorithm::qnn ? Path::quantized : Path::branches;
}

void check_model(const ModelState& model, TrainAlgorithm algorithm) {
  if (model.stage != nn::Stage::full) throw StageError("training needs a float-stage model");
  nn::validate(model);
  for (const auto& layer : model.layers) {
    if (!layer.spec.is_quantized()) continue;
    if (algorithm == TrainAlgorithm::mbbn && !layer.spec.plane_weights) {
      throw ConfigError("mbbn training needs plane weights on every quantized layer");
    }
    if (algorithm != TrainAlgorithm::mbbn && layer.spec.plane_weights) {
      throw ConfigError(std::string(to_string(algorithm)) + " training cannot use plane weights");
    }
  }
}

Tensor weight_plane(const Tensor& w, std::size_t k) {
  const std::size_t rows = w.dim(1), cols = w.dim(2);
  Tensor p({rows, cols});
  std::copy_n(w.values().begin() + static_cast<std::ptrdiff_t>(k * rows * cols), rows * cols, p.values().begin());
  return p;
}

Tensor linear_forward(const LayerState& layer, TrainAlgorithm algorithm, const Tensor& input, LayerCache& c,
                      bool verify_kernel) {
  const auto& spec = layer.spec;
  const Tensor& w = std::get<Tensor>(layer.weight);
  const std::size_t batch = input.dim(0);
  if (spec.kind == LayerKind::dense) {
    if (input.size() != batch * spec.in) throw ShapeError("dense input has the wrong number of features");
    c.rows = input.reshaped({batch, spec.in});
  } else {
    c.geometry = nn::conv_geometry(input.shape(), spec);
    c.rows = nn::im2col(input, c.geometry);
  }

  switch (layer_path(layer, algorithm)) {
    case Path::float_path:
      c.operand = c.rows;
      c.weight = w;
      c.scale = 1.0;
      break;
    case Path::quantized: {
      const auto qx = quantize(c.rows, spec.grid, spec.act_bits, layer.act_t);
      const auto qw = quantize(w, spec.grid, spec.weight_bits, layer.weight_t);
      c.operand = qx.dequantize();
      c.weight = qw.dequantize();
      c.scale = spec.follows_bn ? 1.0 / (qx.d * qw.d) : spec.r;
      c.x_codes = IntTensor(qx.shape);
      c.w_codes = IntTensor(qw.shape);
      for (std::size_t i = 0; i < qx.size(); ++i) c.x_codes[i] = qx.codes[i];
      for (std::size_t i = 0; i < qw.size(); ++i) c.w_codes[i] = qw.codes[i];
      c.code_scale = nn::output_scale(spec, nn::Stage::quantized, qx.d, qw.d);
      break;
    }
    case Path::branches: {
      // sum_m sum_k 2^(m+k-2) A_m W_kb^T factors into (sum_m 2^(m-1) A_m)(sum_k 2^(k-1) W_kb)^T.
      // Digits come from the canonical encoder so that cell edges resolve as in
      // inference; the trig form only supplies the backward derivative.
      const EncodedTensor enc = codes_to_digits(quantize_odd(c.rows, spec.act_bits));
      std::vector<Tensor> a_planes, w_planes;
      c.operand = Tensor(c.rows.shape());
      for (int m = 1; m <= spec.act_bits; ++m) {
        Tensor plane(c.rows.shape());
        for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = enc.digit(m, i);
        c.operand.storage() += static_cast<double>(1 << (m - 1)) * plane.storage();
        a_planes.push_back(std::move(plane));
      }
      c.weight = Tensor({spec.out, spec.fan_in()});
      for (int k = 1; k <= spec.weight_bits; ++k) {
        Tensor plane = binarize(weight_plane(w, static_cast<std::size_t>(k - 1)));
        c.weight.storage() += static_cast<double>(1 << (k - 1)) * plane.storage();
        w_planes.push_back(std::move(plane));
      }
      c.scale = spec.follows_bn ? 1.0 : spec.r / static_cast<double>(odd_levels(spec.act_bits) * odd_levels(spec.weight_bits));
      if (verify_kernel) {
        const IntTensor acc = encoded_gemm(EncodedMatrix::from_planes(a_planes), EncodedMatrix::from_planes(w_planes));
        const Tensor branch_sum = matmul_transposed(c.operand, c.weight);
        for (std::size_t i = 0; i < acc.size(); ++i) {
          if (static_cast<double>(acc[i]) != branch_sum[i]) throw CheckError("branch accumulation disagrees with encoded_gemm");
        }
      }
      break;
    }
  }

  Tensor y;
  if (layer_path(layer, algorithm) == Path::quantized) {
    // Exact code product, as in the quantized inference stage; a float product
    // leaves residues at zero that flip the next layer's quantization.
    const IntTensor acc = integer_gemm(c.x_codes, c.w_codes);
    y = Tensor(acc.shape());
    for (std::size_t i = 0; i < acc.size(); ++i) y[i] = static_cast<double>(acc[i]) * c.code_scale;
  } else {
    y = matmul_transposed(c.operand, c.weight);
    y.storage() *= c.scale;
  }
  if (spec.has_bias) y.matrix().rowwise() += layer.bias.storage().transpose();
  if (spec.kind == LayerKind::conv2d) return nn::rows_to_nchw(y, batch, c.geometry.out_height(), c.geometry.out_width());
  return y;
}

Tensor linear_backward(const LayerState& layer, TrainAlgorithm algorithm, const LayerCache& c, const Tensor& g_out,
                       LayerGrads& g, bool need_input_grad) {
  const auto& spec = layer.spec;
  const Tensor& w = std::get<Tensor>(layer.weight);
  const Tensor g_rows = spec.kind == LayerKind::conv2d ? nn::nchw_to_rows(g_out) : g_out;
  if (spec.has_bias) g.bias.grad.storage() += g_rows.matrix().colwise().sum().transpose();

  Tensor g_y = g_rows;
  g_y.storage() *= c.scale;
  // Gradients w.r.t. the operand and the effective weight of the product.
  const Tensor g_weight = matmul(Tensor::from_matrix(g_y.matrix().transpose()), c.operand);
  Tensor g_operand = need_input_grad ? matmul(g_y, c.weight) : Tensor();

  Tensor g_rows_in;
  switch (layer_path(layer, algorithm)) {
    case Path::float_path:
      g.weight.grad.storage() += g_weight.storage();
      g_rows_in = std::move(g_operand);
      break;
    case Path::quantized: {
      const double wt = spec.grid == GridKind::linear ? layer.weight_t : 1.0;
      const double at = spec.grid == GridKind::linear ? layer.act_t : 1.0;
      for (std::size_t i = 0; i < w.size(); ++i) g.weight.grad[i] += g_weight[i] * quantize_ste_grad(w[i], wt);
      if (spec.grid == GridKind::linear) {
        for (std::size_t i = 0; i < w.size(); ++i) g.weight_t.grad[0] += g_weight[i] * quantize_linear_t_grad(w[i], wt);
        // The input side needs the operand gradient even for the first layer.
        const Tensor g_x = g_operand.empty() ? matmul(g_y, c.weight) : g_operand;
        for (std::size_t i = 0; i < g_x.size(); ++i) g.act_t.grad[0] += g_x[i] * quantize_linear_t_grad(c.rows[i], at);
      }
      if (need_input_grad) {
        g_rows_in = std::move(g_operand);
        for (std::size_t i = 0; i < g_rows_in.size(); ++i) g_rows_in[i] *= quantize_ste_grad(c.rows[i], at);
      }
      break;
    }
    case Path::branches: {
      // g_W_kb = 2^(k-1) g_a^T (sum_m 2^(m-1) A_m), then the clipped straight-through of Binarize.
      const std::size_t n = spec.out * spec.fan_in();
      for (int k = 1; k <= spec.weight_bits; ++k) {
        const double f = static_cast<double>(1 << (k - 1));
        const std::size_t off = static_cast<std::size_t>(k - 1) * n;
        for (std::size_t i = 0; i < n; ++i) g.weight.grad[off + i] += f * g_weight[i] * binarize_grad(w[off + i]);
      }
      if (need_input_grad) {
        // g_A_m = 2^(m-1) g_a W_sum; the encoder backward is
        // sum_m 2^(m-1) g_A_m phi_m'(x) / (2^M - 1).
        g_rows_in = Tensor(c.rows.shape());
        const double levels = static_cast<double>(odd_levels(spec.act_bits));
        for (int m = 1; m <= spec.act_bits; ++m) {
          const double f = static_cast<double>(1 << (m - 1));
          for (std::size_t i = 0; i < g_rows_in.size(); ++i) {
            g_rows_in[i] += f * (f * g_operand[i]) * encoder_derivative(c.rows[i], spec.act_bits, m) / levels;
          }
        }
      }
      break;
    }
  }
  if (!need_input_grad) return {};
  if (spec.kind == LayerKind::conv2d) return nn::col2im(g_rows_in, c.input.dim(0), c.geometry);
  return g_rows_in.reshaped(c.input.shape());
}

Tensor run_forward(const ModelState& model, TrainAlgorithm algorithm, const Tensor& x, std::vector<LayerCache>* caches,
                   bool verify_kernel) {
  Tensor a = x;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerState& layer = model.layers[i];
    LayerCache local;
    LayerCache& c = caches ? (*caches)[i] : local;
    c.input = a;
    if (layer.spec.is_linear()) {
      a = linear_forward(layer, algorithm, a, c, verify_kernel);
    } else {
      a = nn::layer_forward(a, layer, nn::Stage::full);
    }
  }
  return a;
}

double forward_backward(const ModelState& model, TrainAlgorithm algorithm, const Tensor& x, std::span<const int> labels,
                        GradState& gs, bool verify_kernel) {
  check_model(model, algorithm);
  if (gs.layers.size() != model.layers.size()) throw ShapeError("gradient state does not match the model");
  if (x.empty() || x.dim(0) != labels.size()) throw ShapeError("batch and label counts differ");
  std::vector<LayerCache> caches(model.layers.size());
  const Tensor logits = run_forward(model, algorithm, x, &caches, verify_kernel);
  Tensor g;
  const double loss = softmax_cross_entropy(logits, labels, &g);
  if (!std::isfinite(loss)) throw DivergenceError("training diverged: loss is not finite");
  zero_grad(gs);
  for (std::size_t i = model.layers.size(); i-- > 0;) {
    const LayerState& layer = model.layers[i];
    const LayerCache& c = caches[i];
    const bool need_input_grad = i > 0;
    switch (layer.spec.kind) {
      case LayerKind::dense:
      case LayerKind::conv2d:
        g = linear_backward(layer, algorithm, c, g, gs.layers[i], need_input_grad);
        break;
      case LayerKind::activation:
        for (std::size_t j = 0; j < g.size(); ++j) g[j] *= activation_derivative(c.input[j], layer.spec.activation);
        break;
      case LayerKind::batchnorm: {
        const std::size_t channels = layer.spec.in;
        const std::size_t inner = g.size() / (g.dim(0) * channels);
        for (std::size_t j = 0; j < g.size(); ++j) {
          const std::size_t ch = (j / inner) % channels;
          g[j] *= layer.bn.gamma[ch] / std::sqrt(layer.bn.var[ch] + layer.spec.eps);
        }
        break;
      }
    }
  }
  for (const auto& l : gs.layers)
    for (const ParamState* p : {&l.weight, &l.bias, &l.act_t, &l.weight_t}) {
      if (!p->grad.storage().allFinite()) throw DivergenceError("training diverged: gradient is not finite");
    }
  return loss;
}

double step(ModelState& model, TrainAlgorithm algorithm, const Tensor& x, std::span<const int> labels,
            const TrainConfig& cfg, GradState& gs) {
  const double loss = forward_backward(model, algorithm, x, labels, gs, cfg.verify_kernel);
  const OptimizerKind kind = resolve_optimizer(cfg, model);
  optimizer_update(model, gs, kind, resolve_learning_rate(cfg, kind));
  return loss;
}

}  // namespace

std::string_view to_string(TrainAlgorithm algorithm) {
  switch (algorithm) {
    case TrainAlgorithm::full:
      return "float";
    case TrainAlgorithm::qnn:
      return "qnn";
    case TrainAlgorithm::mbbn:
      return "mbbn";
  }
  return "?";
}

TrainAlgorithm parse_train_algorithm(std::string_view name) {
  for (auto a : {TrainAlgorithm::full, TrainAlgorithm::qnn, TrainAlgorithm::mbbn}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown training algorithm '" + std::string(name) + "' (expected float, qnn or mbbn)");
}

nn::Algorithm model_algorithm(TrainAlgorithm algorithm) {
  switch (algorithm) {
    case TrainAlgorithm::full:
      return nn::Algorithm::none;
    case TrainAlgorithm::qnn:
      return nn::Algorithm::qnn;
    case TrainAlgorithm::mbbn:
      return nn::Algorithm::mbbn;
  }
  return nn::Algorithm::none;
}

OptimizerKind resolve_optimizer(const TrainConfig& cfg, const ModelState& model) {
  if (cfg.optimizer != OptimizerKind::automatic) return cfg.optimizer;
  int bits = 0;
  for (const auto& layer : model.layers) {
    if (layer.spec.is_quantized()) bits = std::max({bits, layer.spec.act_bits, layer.spec.weight_bits});
  }
  return bits <= 2 ? OptimizerKind::adam : OptimizerKind::sgd;
}

double resolve_learning_rate(const TrainConfig& cfg, OptimizerKind kind) {
  if (cfg.learning_rate < 0.0 || !std::isfinite(cfg.learning_rate)) throw ConfigError("learning rate must be positive");
  if (cfg.learning_rate > 0.0) return cfg.learning_rate;
  return kind == OptimizerKind::sgd ? 0.1 : 0.01;
}

double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) throw ShapeError("logits must be [batch x classes]");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (grad) *grad = Tensor(logits.shape());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) throw ShapeError("label out of range");
    double mx = logits(b, 0);
    for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, logits(b, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += std::exp(logits(b, c) - mx);
    total += mx + std::log(sum) - logits(b, static_cast<std::size_t>(label));
    if (grad) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double p = std::exp(logits(b, c) - mx) / sum;
        (*grad)(b, c) = (p - (c == static_cast<std::size_t>(label) ? 1.0 : 0.0)) / static_cast<double>(batch);
      }
    }
  }
  return total / static_cast<double>(batch);
}

Tensor training_forward(const ModelState& model, TrainAlgorithm algorithm, const Tensor& x) {
  check_model(model, algorithm);
  return run_forward(model, algorithm, x, nullptr, false);
}

double loss_and_gradients(const ModelState& model, TrainAlgorithm algorithm, const Tensor& x, std::span<const int> labels,
                          GradState& gs, bool verify_kernel) {
  return forward_backward(model, algorithm, x, labels, gs, verify_kernel);
}

double train_step_alg1(ModelState& model, const Tensor& x, std::span<const int> labels, const TrainConfig& cfg,
                       GradState& gs) {
  return step(model, TrainAlgorithm::mbbn, x, labels, cfg, gs);
}

double train_step_alg2(ModelState& model, const Tensor& x, std::span<const int> labels, const TrainConfig& cfg,
                       GradState& gs) {
  return step(model, TrainAlgorithm::qnn, x, labels, cfg, gs);
}

double train_step(ModelState& model, const Tensor& x, std::span<const int> labels, const TrainConfig& cfg, GradState& gs) {
  return step(model, cfg.algorithm, x, labels, cfg, gs);
}

double accuracy(const ModelState& model, TrainAlgorithm algorithm, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const auto predicted = nn::argmax_rows(training_forward(model, algorithm, data.x));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) hits += predicted[i] == data.y[i];
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult fit(ModelState& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg, GradState& gs,
                std::size_t first_epoch, const EpochCallback& on_epoch) {
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
  if (train.size() == 0) throw ConfigError("empty training set");
  check_model(model, cfg.algorithm);
  TrainResult result;
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    Rng rng(Rng::mix64(cfg.seed ^ 0x7A1D5EEDULL) + Rng::mix64(epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto idx = std::span<const std::size_t>(order).subspan(start, std::min(cfg.batch_size, order.size() - start));
      const Dataset batch = train.subset(idx);
      loss_sum += train_step(model, batch.x, batch.y, cfg, gs) * static_cast<double>(idx.size());
    }
    EpochLog log{epoch, loss_sum / static_cast<double>(train.size()), accuracy(model, cfg.algorithm, train),
                 accuracy(model, cfg.algorithm, val)};
    result.log.push_back(log);
    if (on_epoch) on_epoch(model, gs, log);
    if (cfg.target_accuracy && log.val_acc >= *cfg.target_accuracy) {
      result.epoch_reached = epoch;
      break;
    }
  }
  return result;
}

namespace {

Tensor resize_planes(const Tensor& w, std::size_t planes) {
  const std::size_t old = w.dim(0), rows = w.dim(1), cols = w.dim(2), n = rows * cols;
  Tensor out({planes, rows, cols});
  // Align the most significant planes.
  for (std::size_t k = 0; k < planes; ++k) {
    if (k + old < planes) continue;
    const std::size_t src = k + old - planes;
    std::copy_n(w.values().begin() + static_cast<std::ptrdiff_t>(src * n), n, out.values().begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  return out;
}

bool same_topology(const nn::LayerSpec& a, const nn::LayerSpec& b) {
  return a.kind == b.kind && a.in == b.in && a.out == b.out && a.kernel_h == b.kernel_h && a.kernel_w == b.kernel_w &&
         a.stride == b.stride && a.padding == b.padding && a.activation == b.activation &&
         a.full_precision == b.full_precision && a.plane_weights == b.plane_weights && a.has_bias == b.has_bias;
}

}  // namespace

ModelState progressive_init(const ModelState& high, const ModelState& low) {
  if (high.stage != nn::Stage::full || low.stage != nn::Stage::full) throw StageError("progressive init works on float-stage models");
  if (high.layers.size() != low.layers.size()) throw ConfigError("progressive init: layer counts differ");
  ModelState out = low;
  for (std::size_t i = 0; i < high.layers.size(); ++i) {
    const LayerState& src = high.layers[i];
    LayerState& dst = out.layers[i];
    if (!same_topology(src.spec, dst.spec)) throw ConfigError("progressive init: layer " + std::to_string(i) + " differs in topology");
    dst.bn = src.bn;
    if (!dst.spec.is_linear()) continue;
    const Tensor& w = std::get<Tensor>(src.weight);
    dst.weight = dst.spec.plane_weights ? resize_planes(w, static_cast<std::size_t>(dst.spec.weight_bits)) : w;
    dst.bias = src.bias;
    dst.act_t = src.act_t;
    dst.weight_t = src.weight_t;
  }
  nn::validate(out);
  return out;
}

ModelState with_precision(const ModelState& model, int act_bits, int weight_bits) {
  if (model.stage != nn::Stage::full) throw StageError("precision changes work on float-stage models");
  check_bits(act_bits);
  check_bits(weight_bits);
  ModelState low = model;
  for (auto& layer : low.layers) {
    if (!layer.spec.is_quantized()) continue;
    layer.spec.act_bits = act_bits;
    layer.spec.weight_bits = weight_bits;
    if (layer.spec.plane_weights) {
      layer.weight = resize_planes(std::get<Tensor>(layer.weight), static_cast<std::size_t>(weight_bits));
    }
  }
  return progressive_init(model, low);
}

std::vector<int> progressive_schedule(int from_bits, int to_bits) {
  check_bits(from_bits);
  check_bits(to_bits);
  if (from_bits < to_bits) throw ConfigError("progressive schedule must go from more bits to fewer");
  std::vector<int> out;
  for (int b = from_bits; b >= to_bits; --b) out.push_back(b);
  return out;
}

}  // namespace mbbn::train
