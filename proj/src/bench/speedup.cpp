#include "mbbn/bench/speedup.hpp"

#include <bit>
#include <cmath>
#include <cstdio>

#include "mbbn/core/error.hpp"
#include "mbbn/quant/quantize.hpp"

namespace mbbn::bench {

void validate(const SpeedModelParams& p) {
  if (!(p.gamma > 0.0) || !std::isfinite(p.gamma)) throw ConfigError("gamma must be positive");
  if (!(p.beta >= 0.0) || !std::isfinite(p.beta)) throw ConfigError("beta must be non-negative");
  if (p.register_bits < 8 || p.register_bits > 512 || !std::has_single_bit(p.register_bits)) {
    throw ConfigError("register width must be one of 8, 16, 32, 64, 128, 256, 512");
  }
  if (p.n == 0) throw ConfigError("reduction length must be at least 1");
}

double speedup_model(int act_bits, int weight_bits, const SpeedModelParams& p) {
  check_bits(act_bits);
  check_bits(weight_bits);
  validate(p);
  const double mk = static_cast<double>(act_bits) * static_cast<double>(weight_bits);
  const double words = static_cast<double>((p.n + p.register_bits - 1) / p.register_bits);
  return static_cast<double>(p.n) * p.gamma / (mk * (p.gamma + 2.0 * words) + (mk - 1.0) * p.beta);
}

std::string speedup_table(const SpeedModelParams& p) {
  validate(p);
  std::string out = "M\\K";
  char buf[32];
  for (int k = kMinBits; k <= kMaxBits; ++k) {
    std::snprintf(buf, sizeof buf, "%8d", k);
    out += buf;
  }
  out += "\n";
  for (int m = kMinBits; m <= kMaxBits; ++m) {
    std::snprintf(buf, sizeof buf, "%-3d", m);
    out += buf;
    for (int k = kMinBits; k <= kMaxBits; ++k) {
      std::snprintf(buf, sizeof buf, "%8.2f", speedup_model(m, k, p));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace mbbn::bench
