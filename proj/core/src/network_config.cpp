#include "gdk/network_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gdk/error.hpp"
#include "gdk/ops.hpp"

namespace gdk {
namespace {

constexpr std::string_view kDefaultText = R"(# Full-size detector: 448x448 input, 7x7 grid.
input 448
conv 16 3 1 1 mish
pool 2 2
conv 32 3 1 1 mish
pool 2 2
conv 64 3 1 1 mish
conv 32 1 1 0 mish
conv 64 3 1 1 mish
pool 2 2
conv 128 3 1 1 mish
conv 64 1 1 0 mish
conv 128 3 1 1 mish
pool 2 2
conv 256 3 1 1 mish
conv 128 1 1 0 mish
conv 256 3 1 1 mish
pool 2 2
conv 512 3 1 1 mish
conv 256 1 1 0 mish
conv 512 3 1 1 mish
pool 2 2
conv 512 3 1 1 mish
conv 512 3 1 1 relu
fc 256 relu
head 7 2 1
)";

constexpr std::string_view kDeskText = R"(# Desk preset: 112x112 input, 7x7 grid, widths divided by four.
input 112
conv 4 3 1 1 mish
pool 2 2
conv 8 3 1 1 mish
pool 2 2
conv 16 3 1 1 mish
conv 8 1 1 0 mish
conv 16 3 1 1 mish
pool 2 2
conv 32 3 1 1 mish
conv 16 1 1 0 mish
conv 32 3 1 1 mish
pool 2 2
conv 64 3 1 1 mish
conv 32 1 1 0 mish
conv 64 3 1 1 mish
conv 32 1 1 0 mish
conv 64 3 1 1 mish
conv 32 1 1 0 mish
conv 64 3 1 1 mish
conv 64 3 1 1 relu
fc 128 relu
head 7 2 1
)";

std::vector<std::string_view> split_tokens(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    return tokens;
}

std::string layer_label(std::size_t index, const LayerSpec& layer) {
    return "layer " + std::to_string(index + 1) + " (" + std::string(layer_kind_name(layer.kind)) + ")";
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv: return "conv";
        case LayerKind::MaxPool: return "pool";
        case LayerKind::FullyConnected: return "fc";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

std::vector<LayerTrace> validate(const NetworkConfig& config) {
    if (config.input_size == 0) throw ConfigError("input size must be positive");
    if (config.grid_size == 0 || config.boxes_per_cell == 0 || config.num_classes == 0)
        throw ConfigError("head grid, boxes per cell and classes must be positive");
    if (config.layers.empty()) throw ConfigError("network has no layers");

    std::vector<LayerTrace> trace;
    LayerTrace cur{config.input_channels, config.input_size, 0};
    bool flattened = false;
    std::ptrdiff_t last_spatial = -1;

    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const LayerSpec& layer = config.layers[i];
        const std::string label = layer_label(i, layer);
        switch (layer.kind) {
            case LayerKind::Conv:
            case LayerKind::MaxPool: {
                if (flattened) throw ConfigError(label + ": spatial layer after a fully connected layer");
                if (layer.kernel == 0 || layer.stride == 0)
                    throw ConfigError(label + ": kernel and stride must be positive");
                if (layer.kind == LayerKind::Conv && layer.out_channels == 0)
                    throw ConfigError(label + ": output channels must be positive");
                const std::size_t pad = layer.kind == LayerKind::Conv ? layer.padding : 0;
                if (layer.kernel > cur.extent + 2 * pad)
                    throw ConfigError(label + ": window " + std::to_string(layer.kernel) +
                                      " does not fit spatial extent " + std::to_string(cur.extent));
                cur.extent = conv_output_extent(cur.extent, layer.kernel, layer.stride, pad);
                if (layer.kind == LayerKind::Conv) cur.channels = layer.out_channels;
                last_spatial = static_cast<std::ptrdiff_t>(i);
                break;
            }
            case LayerKind::FullyConnected: {
                if (layer.out_channels == 0) throw ConfigError(label + ": width must be positive");
                if (!flattened) {
                    if (cur.extent != config.grid_size) {
                        const std::size_t at = last_spatial >= 0 ? static_cast<std::size_t>(last_spatial) : i;
                        throw ConfigError(layer_label(at, config.layers[at]) + ": spatial trace ends at " +
                                          std::to_string(cur.extent) + "x" + std::to_string(cur.extent) +
                                          " but the head grid is " + std::to_string(config.grid_size) + "x" +
                                          std::to_string(config.grid_size));
                    }
                    flattened = true;
                }
                cur.features = layer.out_channels;
                cur.extent = 0;
                break;
            }
            case LayerKind::Softmax:
                if (i + 1 != config.layers.size()) throw ConfigError(label + ": softmax must be the last layer");
                break;
        }
        trace.push_back(cur);
    }
    if (!flattened) throw ConfigError("network has no fully connected head");
    const LayerSpec& last = config.layers.back();
    const LayerSpec& projection = config.layers.size() >= 2 ? config.layers[config.layers.size() - 2] : last;
    if (last.kind != LayerKind::Softmax || projection.kind != LayerKind::FullyConnected ||
        projection.out_channels != config.head_outputs())
        throw ConfigError("network must end with the head projection to " + std::to_string(config.head_outputs()) +
                          " outputs followed by softmax");
    return trace;
}

NetworkConfig parse_network_config(std::string_view text, const std::string& source) {
    NetworkConfig config;
    bool have_input = false;
    bool have_head = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;

    auto number = [&](std::string_view token, const char* what) {
        std::size_t value = 0;
        auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc{} || end != token.data() + token.size())
            throw ParseError(source, line_no, std::string("expected non-negative integer for ") + what +
                                                  ", got '" + std::string(token) + "'");
        return value;
    };
    auto activation = [&](std::string_view token) {
        auto kind = parse_activation(token);
        if (!kind) throw ParseError(source, line_no, "unknown activation '" + std::string(token) + "'");
        return *kind;
    };

    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto tokens = split_tokens(line);
        if (tokens.empty()) continue;

        const std::string_view directive = tokens[0];
        const std::size_t args = tokens.size() - 1;
        if (have_head) throw ParseError(source, line_no, "directive after 'head'");

        if (directive == "input") {
            if (args != 1) throw ParseError(source, line_no, "usage: input <n>");
            config.input_size = number(tokens[1], "input size");
            if (config.input_size == 0) throw ParseError(source, line_no, "input size must be positive");
            have_input = true;
        } else if (directive == "conv") {
            if (args != 5) throw ParseError(source, line_no, "usage: conv <out_channels> <kernel> <stride> <padding> <activation>");
            LayerSpec layer;
            layer.kind = LayerKind::Conv;
            layer.out_channels = number(tokens[1], "out_channels");
            layer.kernel = number(tokens[2], "kernel");
            layer.stride = number(tokens[3], "stride");
            layer.padding = number(tokens[4], "padding");
            layer.activation = activation(tokens[5]);
            if (layer.out_channels == 0 || layer.kernel == 0 || layer.stride == 0)
                throw ParseError(source, line_no, "conv channels, kernel and stride must be positive");
            config.layers.push_back(layer);
        } else if (directive == "pool") {
            if (args != 2) throw ParseError(source, line_no, "usage: pool <window> <stride>");
            LayerSpec layer;
            layer.kind = LayerKind::MaxPool;
            layer.kernel = number(tokens[1], "window");
            layer.stride = number(tokens[2], "stride");
            if (layer.kernel == 0 || layer.stride == 0)
                throw ParseError(source, line_no, "pool window and stride must be positive");
            config.layers.push_back(layer);
        } else if (directive == "fc") {
            if (args != 1 && args != 2) throw ParseError(source, line_no, "usage: fc <out> [activation]");
            LayerSpec layer;
            layer.kind = LayerKind::FullyConnected;
            layer.out_channels = number(tokens[1], "fc width");
            layer.activation = args == 2 ? activation(tokens[2]) : ActivationKind::ReLU;
            if (layer.out_channels == 0) throw ParseError(source, line_no, "fc width must be positive");
            config.layers.push_back(layer);
        } else if (directive == "head") {
            if (args != 3) throw ParseError(source, line_no, "usage: head <S> <B> <classes>");
            config.grid_size = number(tokens[1], "S");
            config.boxes_per_cell = number(tokens[2], "B");
            config.num_classes = number(tokens[3], "classes");
            if (config.grid_size == 0 || config.boxes_per_cell == 0 || config.num_classes == 0)
                throw ParseError(source, line_no, "head values must be positive");
            LayerSpec projection;
            projection.kind = LayerKind::FullyConnected;
            projection.out_channels = config.head_outputs();
            projection.activation = ActivationKind::Identity;
            config.layers.push_back(projection);
            LayerSpec soft;
            soft.kind = LayerKind::Softmax;
            config.layers.push_back(soft);
            have_head = true;
        } else {
            throw ParseError(source, line_no, "unknown directive '" + std::string(directive) + "'");
        }
    }
    if (!have_input) throw ParseError(source, line_no, "missing 'input' directive");
    if (!have_head) throw ParseError(source, line_no, "missing 'head' directive");
    validate(config);
    return config;
}

NetworkConfig load_network_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open network config: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_network_config(buffer.str(), path.string());
}

std::string to_text(const NetworkConfig& config) {
    std::ostringstream out;
    out << "input " << config.input_size << '\n';
    // The head's projection and softmax are emitted by the `head` directive.
    const std::size_t body = config.layers.size() >= 2 ? config.layers.size() - 2 : config.layers.size();
    for (std::size_t i = 0; i < body; ++i) {
        const LayerSpec& l = config.layers[i];
        switch (l.kind) {
            case LayerKind::Conv:
                out << "conv " << l.out_channels << ' ' << l.kernel << ' ' << l.stride << ' ' << l.padding << ' '
                    << activation_name(l.activation) << '\n';
                break;
            case LayerKind::MaxPool: out << "pool " << l.kernel << ' ' << l.stride << '\n'; break;
            case LayerKind::FullyConnected:
                out << "fc " << l.out_channels << ' ' << activation_name(l.activation) << '\n';
                break;
            case LayerKind::Softmax: break;
        }
    }
    out << "head " << config.grid_size << ' ' << config.boxes_per_cell << ' ' << config.num_classes << '\n';
    return out.str();
}

std::string_view default_network_config_text() { return kDefaultText; }
std::string_view desk_network_config_text() { return kDeskText; }

NetworkConfig default_network_config() { return parse_network_config(kDefaultText, "preset:default"); }
NetworkConfig desk_network_config() { return parse_network_config(kDeskText, "preset:desk"); }

NetworkConfig resolve_network_config(const std::string& name) {
    if (name == "preset:default") return default_network_config();
    if (name == "preset:desk") return desk_network_config();
    return load_network_config(name);
}

}  // namespace gdk
