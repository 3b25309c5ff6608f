#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mbbn/nn/model.hpp"
#include "mbbn/train/dataset.hpp"
#include "mbbn/train/optimizer.hpp"

namespace mbbn::train {

/// full: plain float backprop (baseline). qnn: quantized network with
/// straight-through estimators. mbbn: binary branches trained directly.
enum class TrainAlgorithm { full, qnn, mbbn };

std::string_view to_string(TrainAlgorithm algorithm);
TrainAlgorithm parse_train_algorithm(std::string_view name);
nn::Algorithm model_algorithm(TrainAlgorithm algorithm);

struct TrainConfig {
  TrainAlgorithm algorithm = TrainAlgorithm::qnn;
  OptimizerKind optimizer = OptimizerKind::automatic;
  /// 0 selects 0.1 for SGD and 0.01 for Adam.
  double learning_rate = 0.0;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  /// Stop after the first epoch whose validation accuracy reaches this.
  std::optional<double> target_accuracy;
  /// Cross-check the branch accumulation against encoded_gemm every step.
  bool verify_kernel = false;
};

/// Adam when no quantized layer uses more than 2 bits, SGD otherwise.
OptimizerKind resolve_optimizer(const TrainConfig& cfg, const nn::ModelState& model);
double resolve_learning_rate(const TrainConfig& cfg, OptimizerKind kind);

/// Mean softmax cross-entropy of [B x C] logits. When grad is non-null it
/// receives dLoss/dlogits.
double softmax_cross_entropy(const Tensor& logits, std::span<const int> labels, Tensor* grad);

/// Logits of the training-time forward pass of a float-stage model.
Tensor training_forward(const nn::ModelState& model, TrainAlgorithm algorithm, const Tensor& x);

/// Forward and backward pass; gs receives fresh gradients, weights untouched.
double loss_and_gradients(const nn::ModelState& model, TrainAlgorithm algorithm, const Tensor& x,
                          std::span<const int> labels, GradState& gs, bool verify_kernel = false);

/// One step of binary-branch training on a plane-weight model.
double train_step_alg1(nn::ModelState& model, const Tensor& x, std::span<const int> labels, const TrainConfig& cfg,
                       GradState& gs);
/// One step of quantized training with straight-through estimators.
double train_step_alg2(nn::ModelState& model, const Tensor& x, std::span<const int> labels, const TrainConfig& cfg,
                       GradState& gs);
/// Dispatches on cfg.algorithm.
double train_step(nn::ModelState& model, const Tensor& x, std::span<const int> labels, const TrainConfig& cfg,
                  GradState& gs);

double accuracy(const nn::ModelState& model, TrainAlgorithm algorithm, const Dataset& data);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  /// First epoch whose validation accuracy reached the target.
  std::optional<std::size_t> epoch_reached;
};

using EpochCallback = std::function<void(const nn::ModelState&, const GradState&, const EpochLog&)>;

/// Minibatch training. Epoch e shuffles with a stream derived from (seed, e),
/// so a run resumed from an epoch checkpoint continues identically.
TrainResult fit(nn::ModelState& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg, GradState& gs,
                std::size_t first_epoch = 1, const EpochCallback& on_epoch = {});

/// Same topology with new per-layer precisions on every quantized layer.
/// Plane-weight layers keep their most significant planes, and gain zero
/// planes below them when the weight precision grows.
nn::ModelState with_precision(const nn::ModelState& model, int act_bits, int weight_bits);

/// Copies the float masters of a model trained at higher precision into a
/// lower-precision template. Throws ConfigError on topology mismatch.
nn::ModelState progressive_init(const nn::ModelState& high, const nn::ModelState& low);

/// from, from-1, ..., to.
std::vector<int> progressive_schedule(int from_bits, int to_bits);

}  // namespace mbbn::train
