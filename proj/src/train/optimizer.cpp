#include "mbbn/train/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "mbbn/core/serialize.hpp"

namespace mbbn::train {

namespace {

constexpr std::string_view kOptMagic = "MBBN-OPT 1";

ParamState slot(const Shape& shape) { return {Tensor(shape), Tensor(shape), Tensor(shape)}; }

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

void round_to_float(Tensor& t) {
  for (auto& v : t.values()) v = to_float(v);
}

void update(Tensor& w, ParamState& p, OptimizerKind kind, std::uint64_t step, double lr, double lo, double hi) {
  if (p.grad.empty()) return;
  if (kind == OptimizerKind::adam) {
    adam_update(w, p, step, lr, lo, hi);
  } else {
    sgd_update(w, p.grad, lr, lo, hi);
  }
  round_to_float(w);
  round_to_float(p.m1);
  round_to_float(p.m2);
}

void update_scalar(double& value, ParamState& p, OptimizerKind kind, std::uint64_t step, double lr) {
  if (p.grad.empty()) return;
  Tensor t({1}, value);
  update(t, p, kind, step, lr, kMinThreshold, std::numeric_limits<double>::max());
  value = t[0];
}

}  // namespace

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::automatic:
      return "auto";
    case OptimizerKind::sgd:
      return "sgd";
    case OptimizerKind::adam:
      return "adam";
  }
  return "?";
}

OptimizerKind parse_optimizer(std::string_view name) {
  for (auto k : {OptimizerKind::automatic, OptimizerKind::sgd, OptimizerKind::adam}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected auto, sgd or adam)");
}

GradState make_grad_state(const nn::ModelState& model) {
  if (model.stage != nn::Stage::full) throw StageError("training needs a float-stage model");
  GradState gs;
  for (const auto& layer : model.layers) {
    LayerGrads g;
    if (layer.spec.is_linear()) {
      g.weight = slot(std::get<Tensor>(layer.weight).shape());
      if (layer.spec.has_bias) g.bias = slot({layer.spec.out});
      if (layer.spec.is_quantized() && layer.spec.grid == GridKind::linear) {
        g.act_t = slot({1});
        g.weight_t = slot({1});
      }
    }
    gs.layers.push_back(std::move(g));
  }
  return gs;
}

void zero_grad(GradState& gs) {
  for (auto& l : gs.layers)
    for (ParamState* p : {&l.weight, &l.bias, &l.act_t, &l.weight_t}) p->grad.storage().setZero();
}

void sgd_update(Tensor& w, const Tensor& g, double lr, double lo, double hi) {
  if (w.shape() != g.shape()) throw ShapeError("gradient shape does not match parameter");
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::clamp(w[i] - lr * g[i], lo, hi);
}

void adam_update(Tensor& w, ParamState& p, std::uint64_t step, double lr, double lo, double hi) {
  if (w.shape() != p.grad.shape()) throw ShapeError("gradient shape does not match parameter");
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double g = p.grad[i];
    p.m1[i] = kAdamBeta1 * p.m1[i] + (1.0 - kAdamBeta1) * g;
    p.m2[i] = kAdamBeta2 * p.m2[i] + (1.0 - kAdamBeta2) * g * g;
    const double step_size = lr * (p.m1[i] / c1) / (std::sqrt(p.m2[i] / c2) + kAdamEps);
    w[i] = std::clamp(w[i] - step_size, lo, hi);
  }
}

void optimizer_update(nn::ModelState& model, GradState& gs, OptimizerKind kind, double lr) {
  if (kind == OptimizerKind::automatic) throw ConfigError("optimizer must be resolved before updating");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (gs.layers.size() != model.layers.size()) throw ShapeError("gradient state does not match the model");
  ++gs.step;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& layer = model.layers[i];
    auto& g = gs.layers[i];
    if (!layer.spec.is_linear()) continue;
    update(std::get<Tensor>(layer.weight), g.weight, kind, gs.step, lr, -1.0, 1.0);
    update(layer.bias, g.bias, kind, gs.step, lr, std::numeric_limits<double>::lowest(), std::numeric_limits<double>::max());
    update_scalar(layer.act_t, g.act_t, kind, gs.step, lr);
    update_scalar(layer.weight_t, g.weight_t, kind, gs.step, lr);
  }
}

void save_optimizer(const std::filesystem::path& path, const GradState& gs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << kOptMagic << "\n";
  io::write_u64(os, gs.step);
  io::write_u64(os, gs.layers.size());
  for (const auto& l : gs.layers)
    for (const ParamState* p : {&l.weight, &l.bias, &l.act_t, &l.weight_t}) {
      io::write_u64(os, p->m1.empty() ? 0 : 1);
      if (p->m1.empty()) continue;
      io::write_tensor(os, p->m1);
      io::write_tensor(os, p->m2);
    }
  if (!os) throw IoError("failed writing " + path.string());
}

GradState load_optimizer(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::string magic;
  if (!std::getline(is, magic) || magic != kOptMagic) throw IoError(path.string() + ": not an optimizer state file");
  GradState gs;
  gs.step = io::read_u64(is);
  const auto n = io::read_u64(is);
  if (n > 1u << 16) throw IoError(path.string() + ": too many layers");
  gs.layers.resize(n);
  for (auto& l : gs.layers)
    for (ParamState* p : {&l.weight, &l.bias, &l.act_t, &l.weight_t}) {
      const auto present = io::read_u64(is);
      if (present > 1) throw IoError(path.string() + ": corrupt slot flag");
      if (!present) continue;
      p->m1 = io::read_tensor(is);
      p->m2 = io::read_tensor(is);
      if (p->m1.shape() != p->m2.shape()) throw IoError(path.string() + ": moment shapes disagree");
      p->grad = Tensor(p->m1.shape());
    }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes");
  return gs;
}

}  // namespace mbbn::train
