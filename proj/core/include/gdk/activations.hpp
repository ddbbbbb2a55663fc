#pragma once

#include <optional>
#include <string_view>

namespace gdk {

enum class ActivationKind { Mish, ReLU, Identity };

std::string_view activation_name(ActivationKind kind);
std::optional<ActivationKind> parse_activation(std::string_view name);

/// ln(1 + e^x), stable for large |x|.
double softplus(double x);

/// x * tanh(softplus(x)).
double mish(double x);
double mish_grad(double x);

double relu(double x);
/// Subgradient at zero is taken as 0.
double relu_grad(double x);

double sigmoid(double x);

/// Applies `kind` to the value; templated so float tensors avoid a round trip through double.
template <typename T>
T activate(ActivationKind kind, T x);

template <typename T>
T activate_grad(ActivationKind kind, T x);

}  // namespace gdk
