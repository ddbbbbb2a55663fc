#pragma once

// Network description and its plain-text file format.
//
// One directive per line, '#' starts a comment:
//   input <n>
//   conv <out_channels> <kernel> <stride> <padding> <activation>
//   pool <window> <stride>
//   fc <out> [activation]          (activation defaults to relu)
//   head <S> <B> <classes>
//
// `head` appends the final linear projection to S*S*(B*5 + classes) values and
// the per-cell class softmax. It must be the last directive.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gdk/activations.hpp"

namespace gdk {

enum class LayerKind { Conv, MaxPool, FullyConnected, Softmax };

std::string_view layer_kind_name(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    std::size_t kernel = 0;        // conv kernel or pool window
    std::size_t out_channels = 0;  // conv channels or fc width
    std::size_t stride = 1;
    std::size_t padding = 0;
    ActivationKind activation = ActivationKind::Identity;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkConfig {
    std::size_t input_size = 448;
    std::size_t input_channels = 3;
    std::vector<LayerSpec> layers;
    std::size_t grid_size = 7;
    std::size_t boxes_per_cell = 2;
    std::size_t num_classes = 1;

    std::size_t cell_width() const { return boxes_per_cell * 5 + num_classes; }
    std::size_t head_outputs() const { return grid_size * grid_size * cell_width(); }

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Activation shape after each layer, as (channels, height, width); width 1 height 1 after flattening.
struct LayerTrace {
    std::size_t channels = 0;
    std::size_t extent = 0;  // spatial size; 0 once flattened
    std::size_t features = 0;  // flattened width, set from the first fc onwards
};

/// Checks kind-specific fields and that the spatial trace lands on grid_size.
/// Throws ConfigError naming the offending layer.
std::vector<LayerTrace> validate(const NetworkConfig& config);

NetworkConfig parse_network_config(std::string_view text, const std::string& source = "<config>");
NetworkConfig load_network_config(const std::filesystem::path& path);
std::string to_text(const NetworkConfig& config);

/// 448 input, six 2x2 pools to a 7x7 grid, 16 conv (15 Mish + 1 ReLU), fc 256, head 7 2 1.
NetworkConfig default_network_config();
/// 112 input, four pools to 7x7, channel widths divided by four.
NetworkConfig desk_network_config();

std::string_view default_network_config_text();
std::string_view desk_network_config_text();

/// Resolves "preset:default" / "preset:desk" or loads a file path.
NetworkConfig resolve_network_config(const std::string& name);

}  // namespace gdk
