#pragma once

#include <cstddef>
#include <string>

namespace mbbn::bench {

struct SpeedModelParams {
  /// Speed of a float multiply-accumulate relative to one bitwise operation.
  double gamma = 1.91;
  /// Speed of an addition relative to one bitwise operation.
  double beta = 0.955;
  /// Register width in bits.
  std::size_t register_bits = 64;
  /// Reduction length.
  std::size_t n = 8192;
};

/// Throws ConfigError unless gamma > 0, beta >= 0, register_bits is a power
/// of two in 8..512 and n >= 1.
void validate(const SpeedModelParams& p);

/// Analytic speedup of an M x K bit encoded dot product over a float one:
///
///   S = N gamma / (M K (gamma + 2 ceil(N / L)) + (M K - 1) beta)
double speedup_model(int act_bits, int weight_bits, const SpeedModelParams& p);

/// The model over M, K in 1..8: a header row of K values, then one row per M.
std::string speedup_table(const SpeedModelParams& p);

}  // namespace mbbn::bench
