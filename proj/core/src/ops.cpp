#include "gdk/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "gdk/error.hpp"

namespace gdk {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
    std::size_t n, c, h, w;
    std::size_t k, kh, kw;
    std::size_t oh, ow;
    std::size_t stride, padding;

    std::size_t patch() const { return c * kh * kw; }
    std::size_t out_pixels() const { return oh * ow; }
    bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && padding == 0; }
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                           Conv2dParams params) {
    if (input.rank() != 4) throw ConfigError("conv2d input must be [N,C,H,W], got " + shape_string(input.shape()));
    if (kernel.rank() != 4) throw ConfigError("conv2d kernel must be [K,C,kh,kw], got " + shape_string(kernel.shape()));
    if (params.stride == 0) throw ConfigError("conv2d stride must be positive");
    ConvGeometry g{};
    g.n = input.dim(0);
    g.c = input.dim(1);
    g.h = input.dim(2);
    g.w = input.dim(3);
    g.k = kernel.dim(0);
    g.kh = kernel.dim(2);
    g.kw = kernel.dim(3);
    g.stride = params.stride;
    g.padding = params.padding;
    if (kernel.dim(1) != g.c)
        throw ConfigError("conv2d channel mismatch: input has " + std::to_string(g.c) +
                          " channels, kernel expects " + std::to_string(kernel.dim(1)));
    g.oh = conv_output_extent(g.h, g.kh, g.stride, g.padding);
    g.ow = conv_output_extent(g.w, g.kw, g.stride, g.padding);
    return g;
}

// cols is [C*kh*kw, OH*OW] for one image.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto h = static_cast<std::ptrdiff_t>(g.h);
    const auto w = static_cast<std::ptrdiff_t>(g.w);
    std::size_t row = 0;
    for (std::size_t ch = 0; ch < g.c; ++ch) {
        const T* plane = image + ch * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx, ++row) {
                T* dst = cols + row * g.out_pixels();
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst + oy * g.ow, dst + (oy + 1) * g.ow, T{0});
                        continue;
                    }
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
                        dst[oy * g.ow + ox] = (ix < 0 || ix >= w) ? T{0} : plane[iy * w + ix];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image) {
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto h = static_cast<std::ptrdiff_t>(g.h);
    const auto w = static_cast<std::ptrdiff_t>(g.w);
    std::size_t row = 0;
    for (std::size_t ch = 0; ch < g.c; ++ch) {
        T* plane = image + ch * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx, ++row) {
                const T* src = cols + row * g.out_pixels();
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
                        if (ix >= 0 && ix < w) plane[iy * w + ix] += src[oy * g.ow + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
    if (stride == 0) throw ConfigError("stride must be positive");
    if (kernel == 0 || kernel > in + 2 * padding)
        throw ConfigError("window of " + std::to_string(kernel) + " does not fit extent " +
                          std::to_string(in) + " with padding " + std::to_string(padding));
    return (in + 2 * padding - kernel) / stride + 1;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                      const BasicTensor<T>& bias, Conv2dParams params) {
    const ConvGeometry g = conv_geometry(input, kernel, params);
    if (bias.size() != g.k)
        throw ConfigError("conv2d bias has " + std::to_string(bias.size()) + " entries, expected " +
                          std::to_string(g.k));
    BasicTensor<T> out({g.n, g.k, g.oh, g.ow});
    ConstMatrixMap<T> weights(kernel.data().data(), static_cast<Eigen::Index>(g.k),
                              static_cast<Eigen::Index>(g.patch()));
    std::vector<T> cols(g.pointwise() ? 0 : g.patch() * g.out_pixels());
    const std::size_t in_stride = g.c * g.h * g.w;
    const std::size_t out_stride = g.k * g.out_pixels();
    for (std::size_t n = 0; n < g.n; ++n) {
        const T* image = input.data().data() + n * in_stride;
        const T* col_ptr = image;
        if (!g.pointwise()) {
            im2col(image, g, cols.data());
            col_ptr = cols.data();
        }
        ConstMatrixMap<T> col_mat(col_ptr, static_cast<Eigen::Index>(g.patch()),
                                  static_cast<Eigen::Index>(g.out_pixels()));
        MatrixMap<T> result(out.data().data() + n * out_stride, static_cast<Eigen::Index>(g.k),
                            static_cast<Eigen::Index>(g.out_pixels()));
        result.noalias() = weights * col_mat;
        for (std::size_t k = 0; k < g.k; ++k) result.row(static_cast<Eigen::Index>(k)).array() += bias[k];
    }
    return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& kernel,
                               const BasicTensor<T>& grad_output, Conv2dParams params,
                               bool need_input_grad) {
    const ConvGeometry g = conv_geometry(input, kernel, params);
    if (grad_output.shape() != Shape{g.n, g.k, g.oh, g.ow})
        throw ConfigError("conv2d grad_output shape " + shape_string(grad_output.shape()) +
                          " does not match forward output");
    Conv2dGrads<T> grads;
    grads.kernel = BasicTensor<T>(kernel.shape());
    grads.bias = BasicTensor<T>({g.k});
    if (need_input_grad) grads.input = BasicTensor<T>(input.shape());

    ConstMatrixMap<T> weights(kernel.data().data(), static_cast<Eigen::Index>(g.k),
                              static_cast<Eigen::Index>(g.patch()));
    MatrixMap<T> grad_w(grads.kernel.data().data(), static_cast<Eigen::Index>(g.k),
                        static_cast<Eigen::Index>(g.patch()));
    std::vector<T> cols(g.pointwise() ? 0 : g.patch() * g.out_pixels());
    std::vector<T> grad_cols(need_input_grad && !g.pointwise() ? g.patch() * g.out_pixels() : 0);
    const std::size_t in_stride = g.c * g.h * g.w;
    const std::size_t out_stride = g.k * g.out_pixels();

    for (std::size_t n = 0; n < g.n; ++n) {
        const T* image = input.data().data() + n * in_stride;
        const T* col_ptr = image;
        if (!g.pointwise()) {
            im2col(image, g, cols.data());
            col_ptr = cols.data();
        }
        ConstMatrixMap<T> col_mat(col_ptr, static_cast<Eigen::Index>(g.patch()),
                                  static_cast<Eigen::Index>(g.out_pixels()));
        ConstMatrixMap<T> dy(grad_output.data().data() + n * out_stride, static_cast<Eigen::Index>(g.k),
                             static_cast<Eigen::Index>(g.out_pixels()));
        grad_w.noalias() += dy * col_mat.transpose();
        for (std::size_t k = 0; k < g.k; ++k) grads.bias[k] += dy.row(static_cast<Eigen::Index>(k)).sum();

        if (need_input_grad) {
            T* grad_image = grads.input.data().data() + n * in_stride;
            if (g.pointwise()) {
                MatrixMap<T> dx(grad_image, static_cast<Eigen::Index>(g.patch()),
                                static_cast<Eigen::Index>(g.out_pixels()));
                dx.noalias() = weights.transpose() * dy;
            } else {
                MatrixMap<T> dcols(grad_cols.data(), static_cast<Eigen::Index>(g.patch()),
                                   static_cast<Eigen::Index>(g.out_pixels()));
                dcols.noalias() = weights.transpose() * dy;
                col2im_add(grad_cols.data(), g, grad_image);
            }
        }
    }
    return grads;
}

template <typename T>
PoolResult<T> maxpool2d(const BasicTensor<T>& input, std::size_t window, std::size_t stride) {
    if (input.rank() != 4) throw ConfigError("maxpool2d input must be [N,C,H,W], got " + shape_string(input.shape()));
    if (window == 0 || stride == 0) throw ConfigError("maxpool2d window and stride must be positive");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (window > h || window > w)
        throw ConfigError("maxpool2d window " + std::to_string(window) + " exceeds spatial extent " +
                          std::to_string(h) + "x" + std::to_string(w));
    const std::size_t oh = (h - window) / stride + 1;
    const std::size_t ow = (w - window) / stride + 1;
    PoolResult<T> result{BasicTensor<T>({n, c, oh, ow}), std::vector<std::size_t>(n * c * oh * ow)};
    const T* src = input.data().data();
    std::size_t out = 0;
    for (std::size_t plane = 0; plane < n * c; ++plane) {
        const std::size_t base = plane * h * w;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox, ++out) {
                std::size_t best = base + oy * stride * w + ox * stride;
                T best_value = src[best];
                for (std::size_t ky = 0; ky < window; ++ky) {
                    for (std::size_t kx = 0; kx < window; ++kx) {
                        const std::size_t idx = base + (oy * stride + ky) * w + ox * stride + kx;
                        if (src[idx] > best_value) {
                            best_value = src[idx];
                            best = idx;
                        }
                    }
                }
                result.output[out] = best_value;
                result.argmax[out] = best;
            }
        }
    }
    return result;
}

template <typename T>
BasicTensor<T> maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                                  const BasicTensor<T>& grad_output) {
    if (argmax.size() != grad_output.size())
        throw ConfigError("maxpool2d backward: argmax and grad_output sizes differ");
    BasicTensor<T> grad(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) grad[argmax[i]] += grad_output[i];
    return grad;
}

template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                               const BasicTensor<T>& bias) {
    if (input.rank() != 2 || weights.rank() != 2)
        throw ConfigError("fully_connected expects [N,D] input and [D,O] weights");
    const std::size_t n = input.dim(0), d = input.dim(1), o = weights.dim(1);
    if (weights.dim(0) != d)
        throw ConfigError("fully_connected dimension mismatch: input width " + std::to_string(d) +
                          ", weights " + shape_string(weights.shape()));
    if (bias.size() != o)
        throw ConfigError("fully_connected bias has " + std::to_string(bias.size()) + " entries, expected " +
                          std::to_string(o));
    BasicTensor<T> out({n, o});
    ConstMatrixMap<T> x(input.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    ConstMatrixMap<T> wm(weights.data().data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(o));
    MatrixMap<T> y(out.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(o));
    y.noalias() = x * wm;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < o; ++j) out[r * o + j] += bias[j];
    return out;
}

template <typename T>
FullyConnectedGrads<T> fully_connected_backward(const BasicTensor<T>& input,
                                                const BasicTensor<T>& weights,
                                                const BasicTensor<T>& grad_output,
                                                bool need_input_grad) {
    const std::size_t n = input.dim(0), d = input.dim(1), o = weights.dim(1);
    if (grad_output.shape() != Shape{n, o})
        throw ConfigError("fully_connected grad_output shape mismatch");
    FullyConnectedGrads<T> grads;
    grads.weights = BasicTensor<T>(weights.shape());
    grads.bias = BasicTensor<T>({o});
    ConstMatrixMap<T> x(input.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    ConstMatrixMap<T> wm(weights.data().data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(o));
    ConstMatrixMap<T> dy(grad_output.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(o));
    MatrixMap<T> dw(grads.weights.data().data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(o));
    dw.noalias() = x.transpose() * dy;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < o; ++j) grads.bias[j] += grad_output[r * o + j];
    if (need_input_grad) {
        grads.input = BasicTensor<T>(input.shape());
        MatrixMap<T> dx(grads.input.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        dx.noalias() = dy * wm.transpose();
    }
    return grads;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& input) {
    if (input.rank() == 0) throw UsageError("softmax requires at least one axis");
    if (!input.all_finite()) throw NumericError("softmax input contains non-finite values");
    const std::size_t d = input.shape().back();
    BasicTensor<T> out(input.shape());
    for (std::size_t base = 0; base < input.size(); base += d) {
        T peak = input[base];
        for (std::size_t j = 1; j < d; ++j) peak = std::max(peak, input[base + j]);
        T total{0};
        for (std::size_t j = 0; j < d; ++j) {
            out[base + j] = std::exp(input[base + j] - peak);
            total += out[base + j];
        }
        for (std::size_t j = 0; j < d; ++j) out[base + j] /= total;
    }
    return out;
}

template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_output) {
    const std::size_t d = output.shape().back();
    BasicTensor<T> grad(output.shape());
    for (std::size_t base = 0; base < output.size(); base += d) {
        T dot{0};
        for (std::size_t j = 0; j < d; ++j) dot += output[base + j] * grad_output[base + j];
        for (std::size_t j = 0; j < d; ++j) grad[base + j] = output[base + j] * (grad_output[base + j] - dot);
    }
    return grad;
}

#define GDK_INSTANTIATE_OPS(T)                                                                     \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                   \
                                   const BasicTensor<T>&, Conv2dParams);                           \
    template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                            const BasicTensor<T>&, Conv2dParams, bool);            \
    template PoolResult<T> maxpool2d(const BasicTensor<T>&, std::size_t, std::size_t);             \
    template BasicTensor<T> maxpool2d_backward(const Shape&, const std::vector<std::size_t>&,      \
                                               const BasicTensor<T>&);                             \
    template BasicTensor<T> fully_connected(const BasicTensor<T>&, const BasicTensor<T>&,          \
                                            const BasicTensor<T>&);                                \
    template FullyConnectedGrads<T> fully_connected_backward(                                      \
        const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, bool);                \
    template BasicTensor<T> softmax(const BasicTensor<T>&);                                        \
    template BasicTensor<T> softmax_backward(const BasicTensor<T>&, const BasicTensor<T>&);

GDK_INSTANTIATE_OPS(float)
GDK_INSTANTIATE_OPS(double)

#undef GDK_INSTANTIATE_OPS

}  // namespace gdk
