#include "gdk/sgd.hpp"

#include <cmath>

#include "gdk/error.hpp"

namespace gdk {

template <typename T>
SgdState<T> SgdState<T>::create(const SgdOptions& options, std::span<const BasicTensor<T>> params) {
    if (options.dataset_size == 0) throw UsageError("dataset size must be positive");
    if (options.batch_size == 0) throw UsageError("batch size must be positive");
    if (!(options.gamma > 0.0 && options.gamma <= 1.0)) throw UsageError("gamma must lie in (0, 1]");
    SgdState state;
    state.options = options;
    for (const auto& p : params) state.velocities.emplace_back(p.shape());
    return state;
}

std::uint64_t completed_epochs(std::uint64_t iteration, std::uint64_t batch_size, std::uint64_t dataset_size) {
    if (dataset_size == 0) throw UsageError("dataset size must be positive");
    return iteration * batch_size / dataset_size;
}

double lr_multiplier(double gamma, std::uint64_t iteration, std::uint64_t batch_size, std::uint64_t dataset_size) {
    const std::uint64_t epochs = completed_epochs(iteration, batch_size, dataset_size);
    if (epochs == 0 || gamma == 1.0) return 1.0;
    return std::pow(gamma, static_cast<double>(epochs));
}

template <typename T>
void sgd_step(SgdState<T>& state, std::span<BasicTensor<T>> params, std::span<const BasicTensor<T>> grads) {
    if (params.size() != state.velocities.size() || grads.size() != params.size())
        throw UsageError("sgd_step: parameter, gradient and velocity counts differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].shape() != params[i].shape() || state.velocities[i].shape() != params[i].shape())
            throw UsageError("sgd_step: gradient shape " + shape_string(grads[i].shape()) +
                             " does not match parameter shape " + shape_string(params[i].shape()));
    }
    const T mu = static_cast<T>(state.options.momentum);
    const T step = static_cast<T>(lr_multiplier(state) * state.options.learning_rate);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].data();
        auto v = state.velocities[i].data();
        auto g = grads[i].data();
        for (std::size_t j = 0; j < w.size(); ++j) {
            v[j] = mu * v[j] - step * g[j];
            w[j] += v[j];
        }
    }
    ++state.iteration;
}

template struct SgdState<float>;
template struct SgdState<double>;
template void sgd_step(SgdState<float>&, std::span<Tensor>, std::span<const Tensor>);
template void sgd_step(SgdState<double>&, std::span<Tensor64>, std::span<const Tensor64>);

}  // namespace gdk
