#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gdk/tensor.hpp"

namespace gdk {

struct SgdOptions {
    double learning_rate = 1e-4;
    double momentum = 0.9;
    double gamma = 0.95;           // per-epoch decay of the learning rate
    std::uint64_t batch_size = 32;
    std::uint64_t dataset_size = 1;
};

/// Momentum SGD with an epoch-stepped learning-rate schedule:
///   V <- mu V - gamma^floor(t M / |X|) eta g,   W <- W + V,   t <- t + 1
template <typename T>
struct SgdState {
    SgdOptions options;
    std::vector<BasicTensor<T>> velocities;
    std::uint64_t iteration = 0;

    /// Zero velocities shaped like `params`.
    static SgdState create(const SgdOptions& options, std::span<const BasicTensor<T>> params);
};

/// Number of completed epochs, floor(t M / |X|).
std::uint64_t completed_epochs(std::uint64_t iteration, std::uint64_t batch_size, std::uint64_t dataset_size);

/// gamma^floor(t M / |X|).
double lr_multiplier(double gamma, std::uint64_t iteration, std::uint64_t batch_size, std::uint64_t dataset_size);

template <typename T>
double lr_multiplier(const SgdState<T>& state) {
    return lr_multiplier(state.options.gamma, state.iteration, state.options.batch_size, state.options.dataset_size);
}

/// One update in place. Throws UsageError on count or shape mismatch.
template <typename T>
void sgd_step(SgdState<T>& state, std::span<BasicTensor<T>> params, std::span<const BasicTensor<T>> grads);

extern template struct SgdState<float>;
extern template struct SgdState<double>;

}  // namespace gdk
