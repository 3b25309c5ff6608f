#pragma once

#include <cstddef>

#include "mbbn/core/tensor.hpp"
#include "mbbn/gemm/encoded_matrix.hpp"

namespace mbbn {

/// Exact integer product X * W^T of two encoded matrices sharing the
/// reduction length N:
///
///   acc[p, q] = sum_m sum_k 2^(m+k-2) * XnorPopcount(x_p plane m, w_q plane k)
///
/// which equals sum_n code_x[p, n] * code_w[q, n]. Branches run m-major then k.
/// Rows of the output are partitioned across `threads` workers.
IntTensor encoded_gemm(const EncodedMatrix& x, const EncodedMatrix& w, std::size_t threads = 1);

/// acc * r / ((2^M - 1)(2^K - 1)).
Tensor scale_output(const IntTensor& acc, int act_bits, int weight_bits, double r = 1.0);

/// Quantize X [P x N] and W [N x Q] to the odd grid, encode, multiply with
/// encoded_gemm and rescale. Inputs are expected in [-1, 1].
Tensor quantized_gemm(const Tensor& x, const Tensor& w, int act_bits, int weight_bits, double r = 1.0,
                      std::size_t threads = 1);

/// Plain integer triple loop over codes: x [P x N] times w [Q x N]^T.
IntTensor integer_gemm(const IntTensor& x, const IntTensor& w);

}  // namespace mbbn
