#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mbbn/core/tensor.hpp"
#include "mbbn/gemm/encoded_matrix.hpp"
#include "mbbn/quant/activation.hpp"
#include "mbbn/quant/quantize.hpp"

namespace mbbn::nn {

enum class LayerKind { dense, conv2d, batchnorm, activation };

/// Which weight representation a model carries.
enum class Stage { full, quantized, decomposed };

/// How the float master weights were trained. Recorded in model files so a
/// checkpoint knows which training path produced it.
enum class Algorithm { none, qnn, mbbn };

std::string_view to_string(LayerKind kind);
std::string_view to_string(Stage stage);
std::string_view to_string(Algorithm algorithm);
LayerKind parse_layer_kind(std::string_view name);
Stage parse_stage(std::string_view name);
Algorithm parse_algorithm(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;

  // dense: features; conv2d: channels.
  std::size_t in = 0;
  std::size_t out = 0;

  // conv2d geometry.
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  // batchnorm.
  double eps = 1e-5;

  // activation.
  ActivationKind activation = ActivationKind::htanh;

  // Precision of dense/conv2d layers: M bits for the layer input, K bits for
  // the weights. Ignored for full-precision layers.
  int act_bits = 2;
  int weight_bits = 2;
  GridKind grid = GridKind::odd;
  /// Output scale numerator; the decomposed accumulator is multiplied by
  /// r / ((2^M - 1)(2^K - 1)).
  double r = 1.0;
  /// A batch norm follows: the output scale is dropped and the layer emits the
  /// raw integer accumulator (times the grid steps in the quantized stage).
  bool follows_bn = false;
  /// Keep float weights and inputs in every stage.
  bool full_precision = false;
  /// Weights are K independent binary planes trained directly (multi-branch form).
  bool plane_weights = false;
  bool has_bias = true;

  bool is_linear() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
  bool is_quantized() const { return is_linear() && !full_precision; }
  /// Reduction length of the layer GEMM.
  std::size_t fan_in() const { return kind == LayerKind::conv2d ? in * kernel_h * kernel_w : in; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

using Weight = std::variant<std::monostate, Tensor, QuantizedTensor, EncodedMatrix>;

struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  Tensor mean;
  Tensor var;

  friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

struct LayerState {
  LayerSpec spec;
  /// float stage: Tensor [out, fan_in] (or [K, out, fan_in] for plane weights);
  /// quantized stage: QuantizedTensor [out, fan_in]; decomposed stage:
  /// EncodedMatrix out x fan_in. Full-precision layers keep a Tensor always.
  Weight weight;
  Tensor bias;
  BatchNormParams bn;
  /// Learned clamp thresholds of the linear-grid quantizers.
  double act_t = 1.0;
  double weight_t = 1.0;

  friend bool operator==(const LayerState&, const LayerState&) = default;
};

struct ModelState {
  Stage stage = Stage::full;
  Algorithm algorithm = Algorithm::none;
  std::vector<LayerState> layers;

  friend bool operator==(const ModelState&, const ModelState&) = default;
};

/// Checks weight forms against the stage and weight shapes against the specs.
/// Throws StageError or ShapeError.
void validate(const ModelState& model);

LayerState make_dense(std::size_t in, std::size_t out, int act_bits, int weight_bits);
LayerState make_conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                       std::size_t padding, int act_bits, int weight_bits);
LayerState make_activation(ActivationKind kind);
LayerState make_batchnorm(std::size_t channels, double eps = 1e-5);

/// unit: uniform on [-1, 1], the whole range the masters are clamped to.
/// glorot: uniform on +-sqrt(6 / (fan_in + fan_out)), capped at 1.
enum class InitScheme { unit, glorot };

/// Draws float master weights for every dense/conv2d layer, rounded to float
/// precision so a saved model reloads exactly; biases zero.
void initialize(ModelState& model, Rng& rng, InitScheme scheme = InitScheme::unit);

/// Quantize float masters into a quantized-stage model. Plane-weight layers
/// become odd codes sum_k 2^(k-1) sign(W^k).
ModelState quantize_model(const ModelState& model);

/// Convert every quantized layer to bit planes. Requires odd-grid codes;
/// linear-grid weights raise DecompositionError.
ModelState decompose_model(const ModelState& model);

/// Total bits of the quantized weights relative to 32-bit floats, i.e. 32/K
/// for a uniform precision (0 when no layer is quantized).
double compression_ratio(const ModelState& model);

/// "16x" for whole ratios, "10.7x" otherwise.
std::string format_ratio(double ratio);

}  // namespace mbbn::nn
