#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "mbbn/core/tensor.hpp"
#include "mbbn/nn/model.hpp"

namespace mbbn::train {

enum class OptimizerKind { automatic, sgd, adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

// Adam uses the conventional defaults.
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

// Learned clamp thresholds never shrink below this.
inline constexpr double kMinThreshold = 1e-3;

struct ParamState {
  Tensor grad;
  Tensor m1;
  Tensor m2;

  friend bool operator==(const ParamState&, const ParamState&) = default;
};

/// Gradients and optimizer moments, one slot per model layer. Only dense and
/// conv2d layers have non-empty slots; act_t and weight_t are 1-element.
struct LayerGrads {
  ParamState weight;
  ParamState bias;
  ParamState act_t;
  ParamState weight_t;

  friend bool operator==(const LayerGrads&, const LayerGrads&) = default;
};

struct GradState {
  std::vector<LayerGrads> layers;
  std::uint64_t step = 0;

  friend bool operator==(const GradState&, const GradState&) = default;
};

/// Zeroed gradients and moments shaped like the model's float masters.
GradState make_grad_state(const nn::ModelState& model);
void zero_grad(GradState& gs);

/// w <- w - lr g, then clamp to [lo, hi].
void sgd_update(Tensor& w, const Tensor& g, double lr, double lo, double hi);
/// One Adam step with bias correction at the given (1-based) step, then clamp.
void adam_update(Tensor& w, ParamState& p, std::uint64_t step, double lr, double lo, double hi);

/// Applies one update to every trainable parameter. Weights are clamped to
/// [-1, 1], biases are not clamped, thresholds stay >= kMinThreshold. Every
/// updated value and moment is rounded to float so checkpoints restore it exactly.
void optimizer_update(nn::ModelState& model, GradState& gs, OptimizerKind kind, double lr);

// Optimizer sidecar: "MBBN-OPT 1\n", u64 step, u64 layer count, then per
// layer and per slot (weight, bias, act_t, weight_t) a u64 presence flag and,
// when present, the m1 and m2 tensors. Moments are kept at float precision in
// memory too, so a reloaded state continues bit-identically.
void save_optimizer(const std::filesystem::path& path, const GradState& gs);
GradState load_optimizer(const std::filesystem::path& path);

}  // namespace mbbn::train
