#include "gdk/activations.hpp"

#include <cmath>

namespace gdk {
namespace {

constexpr double kSoftplusCutoff = 20.0;

// With n = e^x (e^x + 2), tanh(softplus(x)) = n / (n + 2). One exp instead of exp+log1p+tanh.
template <typename T>
T mish_impl(T x) {
    if (x > T(kSoftplusCutoff)) return x;
    const T e = std::exp(x);
    const T n = e * (e + T(2));
    return x * n / (n + T(2));
}

template <typename T>
T mish_grad_impl(T x) {
    if (x > T(kSoftplusCutoff)) return T(1);
    const T e = std::exp(x);
    const T n = e * (e + T(2));
    const T t = n / (n + T(2));          // tanh(softplus(x))
    const T sech2 = T(1) - t * t;
    const T sig = e / (T(1) + e);        // d softplus / dx
    return t + x * sech2 * sig;
}

}  // namespace

std::string_view activation_name(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Mish: return "mish";
        case ActivationKind::ReLU: return "relu";
        case ActivationKind::Identity: return "identity";
    }
    return "identity";
}

std::optional<ActivationKind> parse_activation(std::string_view name) {
    if (name == "mish") return ActivationKind::Mish;
    if (name == "relu") return ActivationKind::ReLU;
    if (name == "identity") return ActivationKind::Identity;
    return std::nullopt;
}

double softplus(double x) {
    if (x > kSoftplusCutoff) return x + std::log1p(std::exp(-x));
    if (x < -kSoftplusCutoff) return std::exp(x);
    return std::log1p(std::exp(x));
}

double mish(double x) { return mish_impl(x); }
double mish_grad(double x) { return mish_grad_impl(x); }

double relu(double x) { return x > 0.0 ? x : 0.0; }
double relu_grad(double x) { return x > 0.0 ? 1.0 : 0.0; }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

template <typename T>
T activate(ActivationKind kind, T x) {
    switch (kind) {
        case ActivationKind::Mish: return mish_impl(x);
        case ActivationKind::ReLU: return x > T(0) ? x : T(0);
        case ActivationKind::Identity: return x;
    }
    return x;
}

template <typename T>
T activate_grad(ActivationKind kind, T x) {
    switch (kind) {
        case ActivationKind::Mish: return mish_grad_impl(x);
        case ActivationKind::ReLU: return x > T(0) ? T(1) : T(0);
        case ActivationKind::Identity: return T(1);
    }
    return T(1);
}

template float activate(ActivationKind, float);
template double activate(ActivationKind, double);
template float activate_grad(ActivationKind, float);
template double activate_grad(ActivationKind, double);

}  // namespace gdk
