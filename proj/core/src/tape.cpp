#include "gdk/tape.hpp"

#include <algorithm>

#include "gdk/error.hpp"

namespace gdk {

template <typename T>
Var Tape<T>::constant(BasicTensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, {}, false, -1});
    return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::variable(BasicTensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, {}, true, -1});
    return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::parameter(std::size_t index, BasicTensor<T> value) {
    nodes_.push_back(Node{std::move(value), {}, {}, true, static_cast<std::ptrdiff_t>(index)});
    return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::record(BasicTensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (Var in : inputs) {
        if (in.id >= nodes_.size()) throw UsageError("tape input refers to an unrecorded value");
        needs = needs || nodes_[in.id].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : BackwardFn{}, needs, -1});
    return Var{nodes_.size() - 1};
}

template <typename T>
BasicTensor<T> Tape<T>::grad(Var v) const {
    const Node& node = nodes_.at(v.id);
    if (node.grad.empty()) return BasicTensor<T>(node.value.shape());
    return node.grad;
}

template <typename T>
void Tape<T>::accumulate(Var v, const BasicTensor<T>& g) {
    Node& node = nodes_.at(v.id);
    if (!node.requires_grad) return;
    if (g.size() != node.value.size())
        throw UsageError("gradient shape " + shape_string(g.shape()) + " does not match value shape " +
                         shape_string(node.value.shape()));
    if (node.grad.empty()) {
        node.grad = BasicTensor<T>(node.value.shape(), std::vector<T>(g.data().begin(), g.data().end()));
        return;
    }
    auto dst = node.grad.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
std::vector<BasicTensor<T>> Tape<T>::backward(Var loss) {
    if (loss.id >= nodes_.size()) throw UsageError("loss is not on this tape");
    if (nodes_[loss.id].value.size() != 1) throw UsageError("backward requires a scalar loss, got shape " +
                                                            shape_string(nodes_[loss.id].value.shape()));
    for (Node& node : nodes_) node.grad = BasicTensor<T>();
    backward_visits_ = 0;
    if (nodes_[loss.id].requires_grad)
        nodes_[loss.id].grad = BasicTensor<T>(nodes_[loss.id].value.shape(), T{1});

    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.backward || node.grad.empty()) continue;
        node.backward(*this, Var{i});
        ++backward_visits_;
    }

    std::ptrdiff_t max_index = -1;
    for (const Node& node : nodes_) max_index = std::max(max_index, node.parameter);
    std::vector<BasicTensor<T>> grads(static_cast<std::size_t>(max_index + 1));
    for (const Node& node : nodes_) {
        if (node.parameter < 0) continue;
        auto& slot = grads[static_cast<std::size_t>(node.parameter)];
        if (slot.empty()) slot = BasicTensor<T>(node.value.shape());
        if (node.grad.empty()) continue;
        for (std::size_t j = 0; j < slot.size(); ++j) slot[j] += node.grad[j];
    }
    return grads;
}

template class Tape<float>;
template class Tape<double>;

namespace autograd {

template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var kernel, Var bias, Conv2dParams params) {
    BasicTensor<T> out = gdk::conv2d(tape.value(input), tape.value(kernel), tape.value(bias), params);
    return tape.record(std::move(out), {input, kernel, bias}, [=](Tape<T>& t, Var self) {
        auto grads = conv2d_backward(t.value(input), t.value(kernel), t.output_grad(self), params,
                                     t.requires_grad(input));
        if (t.requires_grad(input)) t.accumulate(input, grads.input);
        t.accumulate(kernel, grads.kernel);
        t.accumulate(bias, grads.bias);
    });
}

template <typename T>
Var maxpool2d(Tape<T>& tape, Var input, std::size_t window, std::size_t stride) {
    PoolResult<T> pooled = gdk::maxpool2d(tape.value(input), window, stride);
    auto argmax = std::move(pooled.argmax);
    return tape.record(std::move(pooled.output), {input},
                       [input, argmax = std::move(argmax)](Tape<T>& t, Var self) {
                           t.accumulate(input, maxpool2d_backward(t.value(input).shape(), argmax,
                                                                  t.output_grad(self)));
                       });
}

template <typename T>
Var fully_connected(Tape<T>& tape, Var input, Var weights, Var bias) {
    BasicTensor<T> out = gdk::fully_connected(tape.value(input), tape.value(weights), tape.value(bias));
    return tape.record(std::move(out), {input, weights, bias}, [=](Tape<T>& t, Var self) {
        auto grads = fully_connected_backward(t.value(input), t.value(weights), t.output_grad(self),
                                              t.requires_grad(input));
        if (t.requires_grad(input)) t.accumulate(input, grads.input);
        t.accumulate(weights, grads.weights);
        t.accumulate(bias, grads.bias);
    });
}

template <typename T>
Var softmax(Tape<T>& tape, Var input) {
    BasicTensor<T> out = gdk::softmax(tape.value(input));
    return tape.record(std::move(out), {input}, [input](Tape<T>& t, Var self) {
        t.accumulate(input, softmax_backward(t.value(self), t.output_grad(self)));
    });
}

template <typename T>
Var activation(Tape<T>& tape, Var input, ActivationKind kind) {
    const BasicTensor<T>& x = tape.value(input);
    BasicTensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = activate(kind, x[i]);
    return tape.record(std::move(out), {input}, [input, kind](Tape<T>& t, Var self) {
        const BasicTensor<T>& xv = t.value(input);
        const BasicTensor<T>& gy = t.output_grad(self);
        BasicTensor<T> gx(xv.shape());
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] = gy[i] * activate_grad(kind, xv[i]);
        t.accumulate(input, gx);
    });
}

template <typename T>
Var flatten(Tape<T>& tape, Var input) {
    const BasicTensor<T>& x = tape.value(input);
    if (x.rank() < 1) throw UsageError("flatten requires a batch axis");
    const std::size_t n = x.dim(0);
    BasicTensor<T> out = x.reshaped({n, x.size() / n});
    return tape.record(std::move(out), {input}, [input](Tape<T>& t, Var self) {
        t.accumulate(input, t.output_grad(self).reshaped(t.value(input).shape()));
    });
}

template <typename T>
Var sum(Tape<T>& tape, Var input) {
    const BasicTensor<T>& x = tape.value(input);
    T total{0};
    for (T v : x.data()) total += v;
    return tape.record(BasicTensor<T>({1}, total), {input}, [input](Tape<T>& t, Var self) {
        t.accumulate(input, BasicTensor<T>(t.value(input).shape(), t.output_grad(self)[0]));
    });
}

template <typename T>
Var square(Tape<T>& tape, Var input) {
    const BasicTensor<T>& x = tape.value(input);
    BasicTensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * x[i];
    return tape.record(std::move(out), {input}, [input](Tape<T>& t, Var self) {
        const BasicTensor<T>& xv = t.value(input);
        const BasicTensor<T>& gy = t.output_grad(self);
        BasicTensor<T> gx(xv.shape());
        for (std::size_t i = 0; i < xv.size(); ++i) gx[i] = T(2) * xv[i] * gy[i];
        t.accumulate(input, gx);
    });
}

template <typename T>
Var scale(Tape<T>& tape, Var input, T factor) {
    BasicTensor<T> out = tape.value(input);
    for (T& v : out.storage()) v *= factor;
    return tape.record(std::move(out), {input}, [input, factor](Tape<T>& t, Var self) {
        BasicTensor<T> gx = t.output_grad(self);
        for (T& v : gx.storage()) v *= factor;
        t.accumulate(input, gx);
    });
}

template <typename T>
Var multiply(Tape<T>& tape, Var a, Var b) {
    const BasicTensor<T>& av = tape.value(a);
    const BasicTensor<T>& bv = tape.value(b);
    if (av.shape() != bv.shape())
        throw UsageError("multiply shape mismatch: " + shape_string(av.shape()) + " vs " +
                         shape_string(bv.shape()));
    BasicTensor<T> out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
    return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, Var self) {
        const BasicTensor<T>& gy = t.output_grad(self);
        BasicTensor<T> ga(gy.shape()), gb(gy.shape());
        for (std::size_t i = 0; i < gy.size(); ++i) {
            ga[i] = gy[i] * t.value(b)[i];
            gb[i] = gy[i] * t.value(a)[i];
        }
        t.accumulate(a, ga);
        t.accumulate(b, gb);
    });
}

#define GDK_INSTANTIATE_AUTOGRAD(T)                                                  \
    template Var conv2d(Tape<T>&, Var, Var, Var, Conv2dParams);                      \
    template Var maxpool2d(Tape<T>&, Var, std::size_t, std::size_t);                 \
    template Var fully_connected(Tape<T>&, Var, Var, Var);                           \
    template Var softmax(Tape<T>&, Var);                                             \
    template Var activation(Tape<T>&, Var, ActivationKind);                          \
    template Var flatten(Tape<T>&, Var);                                             \
    template Var sum(Tape<T>&, Var);                                                 \
    template Var square(Tape<T>&, Var);                                              \
    template Var scale(Tape<T>&, Var, T);                                            \
    template Var multiply(Tape<T>&, Var, Var);

GDK_INSTANTIATE_AUTOGRAD(float)
GDK_INSTANTIATE_AUTOGRAD(double)

#undef GDK_INSTANTIATE_AUTOGRAD

}  // namespace autograd
}  // namespace gdk
