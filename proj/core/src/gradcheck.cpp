#include "gdk/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gdk/error.hpp"

namespace gdk {

double finite_difference_at(const std::function<double(const Tensor64&)>& f, const Tensor64& x,
                            std::size_t index, double step) {
    Tensor64 probe = x;
    const double original = probe[index];
    probe[index] = original + step;
    const double up = f(probe);
    probe[index] = original - step;
    const double down = f(probe);
    return (up - down) / (2.0 * step);
}

Tensor64 finite_difference_gradient(const std::function<double(const Tensor64&)>& f, const Tensor64& x,
                                    double step) {
    if (!(step > 0.0)) throw UsageError("finite difference step must be positive");
    Tensor64 grad(x.shape());
    Tensor64 probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double original = probe[i];
        probe[i] = original + step;
        const double up = f(probe);
        probe[i] = original - step;
        const double down = f(probe);
        probe[i] = original;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

double relative_error(double a, double b, double floor) {
    const double scale = std::max({std::abs(a), std::abs(b), floor});
    return std::abs(a - b) / scale;
}

double max_relative_error(const Tensor64& analytic, const Tensor64& numeric, double floor) {
    if (analytic.size() != numeric.size()) throw UsageError("gradient tensors differ in size");
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, relative_error(analytic[i], numeric[i], floor));
    return worst;
}

}  // namespace gdk
