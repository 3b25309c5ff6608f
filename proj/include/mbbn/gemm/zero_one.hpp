#pragma once

#include "mbbn/core/tensor.hpp"
#include "mbbn/quant/quantize.hpp"

namespace mbbn {

// The unsigned {0,1} encoding scheme, kept as an independent cross-check of
// the {-1,+1} kernel. Digits are plain binary bits of non-negative integers
// and each branch is an AND-popcount.

/// x [P x N] times w [Q x N]^T for non-negative integers below 2^M and 2^K,
/// computed as sum_m sum_k 2^(m+k-2) popcount(c_m AND d_k).
IntTensor zero_one_gemm(const IntTensor& x, const IntTensor& w, int act_bits, int weight_bits);

/// Product of odd codes routed through the {0,1} scheme: each code v maps to
/// u = (v + 2^M - 1) / 2 and the four-term correction restores sum v_x v_w.
IntTensor odd_gemm_via_zero_one(const QuantizedTensor& x, const QuantizedTensor& w);

/// Four-term polynomial for the product of two grid values, using
/// x_q = 2 u / (2^M - 1) - 1. Throws DomainError when an input is off its grid.
double zero_one_product(double xq, double wq, int act_bits, int weight_bits);

/// Same product through {-1,+1} integers: v_x * v_w / ((2^M - 1)(2^K - 1)).
double pm_one_product(double xq, double wq, int act_bits, int weight_bits);

}  // namespace mbbn
