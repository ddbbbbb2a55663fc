#include "gdk/network.hpp"

#include <cmath>
#include <random>

#include "gdk/error.hpp"

namespace gdk {

GridPrediction GridPrediction::zeros(std::size_t grid_size, std::size_t boxes_per_cell, std::size_t num_classes) {
    GridPrediction g;
    g.grid_size = grid_size;
    g.boxes_per_cell = boxes_per_cell;
    g.num_classes = num_classes;
    g.values = Tensor64({grid_size, grid_size, g.cell_width()});
    return g;
}

template <typename T>
GridPrediction squash_head(std::span<const T> raw, const NetworkConfig& config) {
    if (raw.size() != config.head_outputs())
        throw UsageError("head output has " + std::to_string(raw.size()) + " values, expected " +
                         std::to_string(config.head_outputs()));
    GridPrediction grid = GridPrediction::zeros(config.grid_size, config.boxes_per_cell, config.num_classes);
    const std::size_t width = grid.cell_width();
    const std::size_t B = config.boxes_per_cell;
    for (std::size_t cell = 0; cell < config.grid_size * config.grid_size; ++cell) {
        const T* in = raw.data() + cell * width;
        double* out = grid.values.data().data() + cell * width;
        for (std::size_t b = 0; b < B; ++b) {
            out[b * 5 + 0] = sigmoid(in[b * 5 + 0]);
            out[b * 5 + 1] = sigmoid(in[b * 5 + 1]);
            const double sw = sigmoid(in[b * 5 + 2]);
            const double sh = sigmoid(in[b * 5 + 3]);
            out[b * 5 + 2] = sw * sw;
            out[b * 5 + 3] = sh * sh;
            out[b * 5 + 4] = sigmoid(in[b * 5 + 4]);
        }
        const std::size_t C = config.num_classes;
        if (C == 1) {
            out[B * 5] = sigmoid(in[B * 5]);
        } else {
            double peak = in[B * 5];
            for (std::size_t c = 1; c < C; ++c) peak = std::max(peak, static_cast<double>(in[B * 5 + c]));
            double total = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                out[B * 5 + c] = std::exp(static_cast<double>(in[B * 5 + c]) - peak);
                total += out[B * 5 + c];
            }
            for (std::size_t c = 0; c < C; ++c) out[B * 5 + c] /= total;
        }
    }
    return grid;
}

std::vector<BBox> decode_predictions(const GridPrediction& grid, double conf_threshold) {
    if (!(conf_threshold >= 0.0 && conf_threshold <= 1.0))
        throw UsageError("confidence threshold must lie in [0, 1]");
    std::vector<BBox> boxes;
    const double S = static_cast<double>(grid.grid_size);
    for (std::size_t row = 0; row < grid.grid_size; ++row) {
        for (std::size_t col = 0; col < grid.grid_size; ++col) {
            int best_class = 0;
            for (std::size_t c = 1; c < grid.num_classes; ++c)
                if (grid.at(row, col, grid.boxes_per_cell * 5 + c) >
                    grid.at(row, col, grid.boxes_per_cell * 5 + static_cast<std::size_t>(best_class)))
                    best_class = static_cast<int>(c);
            for (std::size_t b = 0; b < grid.boxes_per_cell; ++b) {
                const double conf = grid.at(row, col, b * 5 + 4);
                if (conf < conf_threshold) continue;
                BBox box;
                box.cx = (static_cast<double>(col) + grid.at(row, col, b * 5 + 0)) / S;
                box.cy = (static_cast<double>(row) + grid.at(row, col, b * 5 + 1)) / S;
                box.w = grid.at(row, col, b * 5 + 2);
                box.h = grid.at(row, col, b * 5 + 3);
                box.confidence = conf;
                box.class_id = best_class;
                boxes.push_back(box);
            }
        }
    }
    return boxes;
}

template <typename T>
Network<T> Network<T>::build(const NetworkConfig& config, std::uint64_t seed) {
    validate(config);
    Network net;
    net.config_ = config;
    std::mt19937_64 rng(seed);

    auto add = [&](const std::string& name, Shape shape, std::size_t fan_in, std::size_t outputs) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        BasicTensor<T> weight(shape);
        for (T& v : weight.storage()) v = static_cast<T>(dist(rng));
        net.names_.push_back(name + ".weight");
        net.params_.push_back(std::move(weight));
        net.names_.push_back(name + ".bias");
        net.params_.push_back(BasicTensor<T>({outputs}));
    };

    std::size_t channels = config.input_channels;
    std::size_t features = 0;
    std::size_t conv_index = 0, fc_index = 0;
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const LayerSpec& layer = config.layers[i];
        net.layer_param_.push_back(-1);
        switch (layer.kind) {
            case LayerKind::Conv: {
                net.layer_param_.back() = static_cast<std::ptrdiff_t>(net.params_.size());
                add("conv" + std::to_string(conv_index++), {layer.out_channels, channels, layer.kernel, layer.kernel},
                    channels * layer.kernel * layer.kernel, layer.out_channels);
                channels = layer.out_channels;
                break;
            }
            case LayerKind::MaxPool: break;
            case LayerKind::FullyConnected: {
                const std::size_t in = features == 0 ? channels * config.grid_size * config.grid_size : features;
                const bool is_head = i + 2 == config.layers.size();
                net.layer_param_.back() = static_cast<std::ptrdiff_t>(net.params_.size());
                add(is_head ? std::string("head") : "fc" + std::to_string(fc_index++), {in, layer.out_channels}, in,
                    layer.out_channels);
                features = layer.out_channels;
                break;
            }
            case LayerKind::Softmax: break;
        }
    }
    return net;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
}

template <typename T>
Var Network<T>::forward(Tape<T>& tape, Var images) const {
    const BasicTensor<T>& x = tape.value(images);
    if (x.rank() != 4 || x.dim(1) != config_.input_channels || x.dim(2) != config_.input_size ||
        x.dim(3) != config_.input_size)
        throw UsageError("network expects input [N," + std::to_string(config_.input_channels) + "," +
                         std::to_string(config_.input_size) + "," + std::to_string(config_.input_size) + "], got " +
                         shape_string(x.shape()));
    Var cur = images;
    for (std::size_t i = 0; i < config_.layers.size(); ++i) {
        const LayerSpec& layer = config_.layers[i];
        switch (layer.kind) {
            case LayerKind::Conv: {
                const auto p = static_cast<std::size_t>(layer_param_[i]);
                Var w = tape.parameter(p, params_[p]);
                Var b = tape.parameter(p + 1, params_[p + 1]);
                cur = autograd::conv2d(tape, cur, w, b, Conv2dParams{layer.stride, layer.padding});
                if (layer.activation != ActivationKind::Identity) cur = autograd::activation(tape, cur, layer.activation);
                break;
            }
            case LayerKind::MaxPool: cur = autograd::maxpool2d(tape, cur, layer.kernel, layer.stride); break;
            case LayerKind::FullyConnected: {
                if (tape.value(cur).rank() != 2) cur = autograd::flatten(tape, cur);
                const auto p = static_cast<std::size_t>(layer_param_[i]);
                Var w = tape.parameter(p, params_[p]);
                Var b = tape.parameter(p + 1, params_[p + 1]);
                cur = autograd::fully_connected(tape, cur, w, b);
                if (layer.activation != ActivationKind::Identity) cur = autograd::activation(tape, cur, layer.activation);
                break;
            }
            case LayerKind::Softmax:
                // Class softmax is applied per cell by squash_head and the detection loss.
                break;
        }
    }
    if (!tape.value(cur).all_finite()) throw NumericError("network forward produced non-finite values");
    return cur;
}

template <typename T>
BasicTensor<T> Network<T>::forward_raw(const BasicTensor<T>& images) const {
    Tape<T> tape;
    Var out = forward(tape, tape.constant(images));
    return tape.value(out);
}

template <typename T>
GridPrediction Network<T>::predict(const BasicTensor<T>& image) const {
    if (image.rank() != 4 || image.dim(0) != 1) throw UsageError("predict expects a single image [1,C,H,W]");
    const BasicTensor<T> raw = forward_raw(image);
    return squash_head<T>(raw.data(), config_);
}

template <typename T>
std::vector<NamedTensor> Network<T>::to_named_tensors() const {
    std::vector<NamedTensor> out;
    out.reserve(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) out.push_back(NamedTensor{names_[i], params_[i].template cast<float>()});
    return out;
}

template <typename T>
void Network<T>::load_named_tensors(const std::vector<NamedTensor>& tensors) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const NamedTensor* t = find_tensor(tensors, names_[i]);
        if (!t) throw ConfigError("checkpoint is missing parameter '" + names_[i] + "'");
        if (t->value.shape() != params_[i].shape())
            throw ConfigError("checkpoint parameter '" + names_[i] + "' has shape " + shape_string(t->value.shape()) +
                              ", network expects " + shape_string(params_[i].shape()));
        params_[i] = t->value.template cast<T>();
    }
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
    Network<U> out;
    out.config_ = config_;
    out.names_ = names_;
    out.layer_param_ = layer_param_;
    for (const auto& p : params_) out.params_.push_back(p.template cast<U>());
    return out;
}

template <typename T>
std::vector<BBox> detect(const Network<T>& network, const BasicTensor<T>& image, double conf_threshold,
                         double nms_threshold) {
    const GridPrediction grid = network.predict(image);
    const std::vector<BBox> boxes = decode_predictions(grid, conf_threshold);
    return nms(boxes, nms_threshold);
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template GridPrediction squash_head<float>(std::span<const float>, const NetworkConfig&);
template GridPrediction squash_head<double>(std::span<const double>, const NetworkConfig&);
template std::vector<BBox> detect(const Network<float>&, const Tensor&, double, double);
template std::vector<BBox> detect(const Network<double>&, const Tensor64&, double, double);

}  // namespace gdk
