#pragma once

// Forward and backward kernels for the layer types the detector uses.
// All functions are pure; shapes are validated and violations throw ConfigError.

#include <cstddef>
#include <vector>

#include "gdk/tensor.hpp"

namespace gdk {

struct Conv2dParams {
    std::size_t stride = 1;
    std::size_t padding = 0;
};

/// Output extent of a sliding window along one axis.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

/// Cross-correlation of input [N,C,H,W] with kernel [K,C,kh,kw], plus bias [K].
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias, Conv2dParams params);

template <typename T>
struct Conv2dGrads {
    BasicTensor<T> input;  // empty when not requested
    BasicTensor<T> kernel;
    BasicTensor<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                               const BasicTensor<T>& grad_output, Conv2dParams params,
                               bool need_input_grad);

template <typename T>
struct PoolResult {
    BasicTensor<T> output;
    std::vector<std::size_t> argmax;  // flat input offset of each output cell's winner
};

/// Max over window x window patches. Ties resolve to the first maximum in row-major window order.
template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input, std::size_t window, std::size_t stride);

template <typename T>
BasicTensor<T> maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                                  const BasicTensor<T>& grad_output);

/// input [N,D] x weights [D,O] + bias [O].
template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                               const BasicTensor<T>& bias);

template <typename T>
struct FullyConnectedGrads {
    BasicTensor<T> input;
    BasicTensor<T> weights;
    BasicTensor<T> bias;
};

template <typename T>
FullyConnectedGrads<T> fully_connected_backward(const BasicTensor<T>& input,
                                                const BasicTensor<T>& weights,
                                                const BasicTensor<T>& grad_output,
                                                bool need_input_grad);

/// Softmax along the last axis, max-subtracted.
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_output);

}  // namespace gdk
