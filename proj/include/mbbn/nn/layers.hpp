#pragma once

#include <cstddef>

#include "mbbn/core/tensor.hpp"
#include "mbbn/nn/model.hpp"

namespace mbbn::nn {

struct ConvGeometry {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_height() const { return (height + 2 * padding - kernel_h) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * padding - kernel_w) / stride + 1; }
  std::size_t patch_size() const { return channels * kernel_h * kernel_w; }
};

/// Geometry of a conv layer applied to a B x C x H x W input. Throws
/// ShapeError when the kernel does not fit or the channels disagree.
ConvGeometry conv_geometry(const Shape& input, const LayerSpec& spec);

/// Patch matrix [B*Ho*Wo, C*kh*kw]; rows ordered (b, oy, ox), columns (c, ky, kx).
/// Padding cells are zero.
Tensor im2col(const Tensor& x, const ConvGeometry& g);

/// Adjoint of im2col: scatters patch gradients back onto a B x C x H x W tensor.
Tensor col2im(const Tensor& cols, std::size_t batch, const ConvGeometry& g);

/// [B*Ho*Wo, O] GEMM rows back to B x O x Ho x Wo.
Tensor rows_to_nchw(const Tensor& rows, std::size_t batch, std::size_t out_h, std::size_t out_w);
/// Inverse of rows_to_nchw.
Tensor nchw_to_rows(const Tensor& x);

/// Stage-dependent GEMM of a layer: input rows [R, fan_in] -> [R, out],
/// without bias. Full stage: float product. Quantized stage: exact integer
/// product of the input and weight codes times the output scale. Decomposed
/// stage: encoded_gemm on odd-grid input codes, then the same scale.
Tensor linear_rows(const Tensor& rows, const LayerState& layer, Stage stage, std::size_t threads = 1);

/// x [B x N] (trailing dims flattened) -> [B x out].
Tensor dense_forward(const Tensor& x, const LayerState& layer, Stage stage, std::size_t threads = 1);

/// x [B x C x H x W] -> [B x out x Ho x Wo] through im2col + linear_rows.
Tensor conv2d_forward(const Tensor& x, const LayerState& layer, Stage stage, std::size_t threads = 1);

/// Inference-mode affine normalization over dim 1 of a rank-2 or rank-4 input.
Tensor batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                         const Tensor& var, double eps);

Tensor layer_forward(const Tensor& x, const LayerState& layer, Stage stage, std::size_t threads = 1);

Tensor model_forward(const ModelState& model, const Tensor& x, std::size_t threads = 1);

/// Row-wise argmax of a [B x C] logits tensor.
std::vector<int> argmax_rows(const Tensor& logits);

/// Multiplier of the integer code product of a layer: 1 when a batch norm
/// follows, r / ((2^M - 1)(2^K - 1)) on the odd grid, r d_x d_w on the linear grid.
double output_scale(const LayerSpec& spec, Stage stage, double act_step, double weight_step);

}  // namespace mbbn::nn
