#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gdk/box.hpp"
#include "gdk/checkpoint.hpp"
#include "gdk/network_config.hpp"
#include "gdk/tape.hpp"
#include "gdk/tensor.hpp"

namespace gdk {

/// Decoded head output for one image, shape [S, S, B*5 + classes].
///
/// Per box b the slots b*5 .. b*5+4 hold (x, y, w, h, C_s): x, y are cell-relative and
/// sigmoid-bounded, w, h are image-relative (the squared sigmoid of the raw output), C_s is
/// a sigmoid. The trailing `classes` slots hold class probabilities (softmax over the cell's
/// logits; a sigmoid when there is a single class).
struct GridPrediction {
    std::size_t grid_size = 0;
    std::size_t boxes_per_cell = 0;
    std::size_t num_classes = 0;
    Tensor64 values;

    std::size_t cell_width() const { return boxes_per_cell * 5 + num_classes; }
    double& at(std::size_t row, std::size_t col, std::size_t slot) {
        return values[(row * grid_size + col) * cell_width() + slot];
    }
    double at(std::size_t row, std::size_t col, std::size_t slot) const {
        return values[(row * grid_size + col) * cell_width() + slot];
    }

    static GridPrediction zeros(std::size_t grid_size, std::size_t boxes_per_cell, std::size_t num_classes);
};

/// Applies the output squashing to one image's raw head values.
template <typename T>
GridPrediction squash_head(std::span<const T> raw, const NetworkConfig& config);

/// Boxes with C_s >= threshold, converted to image-normalized center form.
std::vector<BBox> decode_predictions(const GridPrediction& grid, double conf_threshold);

template <typename T>
class Network {
public:
    /// Validates the config and initializes weights uniformly in +-sqrt(6 / fan_in), biases zero.
    static Network build(const NetworkConfig& config, std::uint64_t seed);

    const NetworkConfig& config() const noexcept { return config_; }
    const std::vector<std::string>& parameter_names() const noexcept { return names_; }
    std::vector<BasicTensor<T>>& parameters() noexcept { return params_; }
    const std::vector<BasicTensor<T>>& parameters() const noexcept { return params_; }
    std::size_t parameter_count() const;

    /// images [N, C, input, input] -> raw head values [N, S*S*(B*5 + classes)].
    Var forward(Tape<T>& tape, Var images) const;
    BasicTensor<T> forward_raw(const BasicTensor<T>& images) const;

    /// Single image [1, C, input, input] -> decoded grid.
    GridPrediction predict(const BasicTensor<T>& image) const;

    std::vector<NamedTensor> to_named_tensors() const;
    /// Copies weights by name; every parameter must be present with a matching shape.
    void load_named_tensors(const std::vector<NamedTensor>& tensors);

    template <typename U>
    Network<U> cast() const;

private:
    template <typename U>
    friend class Network;

    NetworkConfig config_;
    std::vector<std::string> names_;
    std::vector<BasicTensor<T>> params_;
    // Per layer, index of its weight parameter (bias follows), or -1.
    std::vector<std::ptrdiff_t> layer_param_;
};

extern template class Network<float>;
extern template class Network<double>;

/// forward -> decode -> nms.
template <typename T>
std::vector<BBox> detect(const Network<T>& network, const BasicTensor<T>& image, double conf_threshold,
                         double nms_threshold);

}  // namespace gdk
