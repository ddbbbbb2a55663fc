#pragma once

// Reverse-mode automatic differentiation over BasicTensor values.
//
// A Tape records every op of one forward pass. backward() replays it in reverse,
// visiting each recorded op exactly once. Tapes are single-use and single-threaded;
// build a fresh one per forward pass.

#include <cstddef>
#include <functional>
#include <vector>

#include "gdk/activations.hpp"
#include "gdk/ops.hpp"
#include "gdk/tensor.hpp"

namespace gdk {

struct Var {
    std::size_t id = 0;
};

template <typename T>
class Tape {
public:
    /// Called during backward with the tape and the op's own output Var.
    using BackwardFn = std::function<void(Tape&, Var)>;

    Var constant(BasicTensor<T> value);
    /// A leaf whose gradient is tracked; read it back with grad().
    Var variable(BasicTensor<T> value);
    /// A leaf bound to slot `index` of the caller's parameter list.
    Var parameter(std::size_t index, BasicTensor<T> value);

    /// Appends an op output. `fn` is dropped when no input requires a gradient.
    Var record(BasicTensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn);

    const BasicTensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient of the last backward() loss w.r.t. v; zeros when v was not reached.
    BasicTensor<T> grad(Var v) const;

    /// Adds into v's gradient buffer. For use inside BackwardFn.
    void accumulate(Var v, const BasicTensor<T>& g);
    const BasicTensor<T>& output_grad(Var v) const { return nodes_.at(v.id).grad; }

    /// Runs reverse accumulation from a scalar loss. Returns one gradient per parameter
    /// slot (0 .. max registered index); unreached parameters get zero tensors.
    std::vector<BasicTensor<T>> backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        BasicTensor<T> value;
        BasicTensor<T> grad;
        BackwardFn backward;
        bool requires_grad = false;
        std::ptrdiff_t parameter = -1;
    };

    std::vector<Node> nodes_;
    std::size_t backward_visits_ = 0;

public:
    /// Number of op backward functions executed by the most recent backward().
    std::size_t backward_visits() const noexcept { return backward_visits_; }
};

extern template class Tape<float>;
extern template class Tape<double>;

namespace autograd {

template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var kernel, Var bias, Conv2dParams params);

template <typename T>
Var maxpool2d(Tape<T>& tape, Var input, std::size_t window, std::size_t stride);

template <typename T>
Var fully_connected(Tape<T>& tape, Var input, Var weights, Var bias);

template <typename T>
Var softmax(Tape<T>& tape, Var input);

template <typename T>
Var activation(Tape<T>& tape, Var input, ActivationKind kind);

/// [N, ...] -> [N, prod(...)].
template <typename T>
Var flatten(Tape<T>& tape, Var input);

/// Sum of all elements as a [1] tensor.
template <typename T>
Var sum(Tape<T>& tape, Var input);

template <typename T>
Var square(Tape<T>& tape, Var input);

template <typename T>
Var scale(Tape<T>& tape, Var input, T factor);

template <typename T>
Var multiply(Tape<T>& tape, Var a, Var b);

}  // namespace autograd
}  // namespace gdk
