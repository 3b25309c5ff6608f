#include "mbbn/quant/activation.hpp"

#include <algorithm>
#include <cmath>

namespace mbbn {

double activate(double x, ActivationKind kind) {
  switch (kind) {
    case ActivationKind::identity:
      return x;
    case ActivationKind::tanh:
      return std::tanh(x);
    case ActivationKind::sigmoid:
      return 1.0 / (1.0 + std::exp(-x));
    case ActivationKind::htanh:
      return std::clamp(x, -1.0, 1.0);
    case ActivationKind::hrelu:
      return std::clamp(x, 0.0, 1.0);
  }
  return x;
}

double activation_derivative(double x, ActivationKind kind) {
  switch (kind) {
    case ActivationKind::identity:
      return 1.0;
    case ActivationKind::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case ActivationKind::htanh:
      return (x >= -1.0 && x <= 1.0) ? 1.0 : 0.0;
    case ActivationKind::hrelu:
      return (x >= 0.0 && x <= 1.0) ? 1.0 : 0.0;
  }
  return 1.0;
}

Tensor activation(const Tensor& x, ActivationKind kind) {
  return map(x, [kind](double v) { return activate(v, kind); });
}

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::identity:
      return "identity";
    case ActivationKind::tanh:
      return "tanh";
    case ActivationKind::sigmoid:
      return "sigmoid";
    case ActivationKind::htanh:
      return "htanh";
    case ActivationKind::hrelu:
      return "hrelu";
  }
  return "identity";
}

ActivationKind parse_activation(std::string_view name) {
  for (auto k : {ActivationKind::identity, ActivationKind::tanh, ActivationKind::sigmoid,
                 ActivationKind::htanh, ActivationKind::hrelu}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

}  // namespace mbbn
