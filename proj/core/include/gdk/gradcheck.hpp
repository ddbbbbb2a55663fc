#pragma once

#include <functional>

#include "gdk/tensor.hpp"

namespace gdk {

/// Central-difference estimate (f(x + h e_i) - f(x - h e_i)) / 2h for every element of x.
Tensor64 finite_difference_gradient(const std::function<double(const Tensor64&)>& f, const Tensor64& x,
                                    double step = 1e-5);

/// Central difference along a single coordinate.
double finite_difference_at(const std::function<double(const Tensor64&)>& f, const Tensor64& x,
                            std::size_t index, double step = 1e-5);

/// |a - b| / max(|a|, |b|, floor). The floor keeps exact zeros from dividing by zero.
double relative_error(double a, double b, double floor = 1e-8);

/// Largest elementwise relative_error between two same-shaped tensors.
double max_relative_error(const Tensor64& analytic, const Tensor64& numeric, double floor = 1e-8);

}  // namespace gdk
