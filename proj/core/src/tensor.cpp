#include "gdk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gdk/error.hpp"

namespace gdk {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    for (std::size_t d : shape_)
        if (d == 0) throw UsageError("tensor extents must be positive: " + shape_string(shape_));
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    for (std::size_t d : shape_)
        if (d == 0) throw UsageError("tensor extents must be positive: " + shape_string(shape_));
    if (shape_size(shape_) != data_.size())
        throw UsageError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
}

template <typename T>
std::size_t BasicTensor<T>::offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size())
        throw UsageError("index rank mismatch for shape " + shape_string(shape_));
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= shape_[axis]) throw UsageError("index out of range for shape " + shape_string(shape_));
        off = off * shape_[axis] + i;
        ++axis;
    }
    return off;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size())
        throw UsageError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return BasicTensor(std::move(shape), data_);
}

template <typename T>
void BasicTensor<T>::fill(T value) {
    std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool BasicTensor<T>::all_finite() const noexcept {
    for (T v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace gdk
