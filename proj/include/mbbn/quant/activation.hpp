#pragma once

#include <string>
#include <string_view>

#include "mbbn/core/tensor.hpp"

namespace mbbn {

enum class ActivationKind { identity, tanh, sigmoid, htanh, hrelu };

double activate(double x, ActivationKind kind);

/// Derivative used by backprop. The hard variants use 1 inside their linear
/// range (closed interval) and 0 outside.
double activation_derivative(double x, ActivationKind kind);

Tensor activation(const Tensor& x, ActivationKind kind);

std::string_view to_string(ActivationKind kind);
ActivationKind parse_activation(std::string_view name);

}  // namespace mbbn
