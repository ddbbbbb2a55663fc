#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gdk/error.hpp"
#include "gdk/network.hpp"
#include "gdk/network_config.hpp"

using namespace gdk;

namespace {

std::size_t count_kind(const NetworkConfig& c, LayerKind kind) {
    return static_cast<std::size_t>(std::count_if(c.layers.begin(), c.layers.end(),
                                                  [&](const LayerSpec& l) { return l.kind == kind; }));
}

std::string error_of(const std::string& text) {
    try {
        parse_network_config(text, "net.cfg");
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(NetworkConfig, DefaultPresetShape) {
    const NetworkConfig c = default_network_config();
    EXPECT_EQ(c.input_size, 448u);
    EXPECT_EQ(count_kind(c, LayerKind::Conv), 16u);
    EXPECT_EQ(count_kind(c, LayerKind::FullyConnected), 2u);
    EXPECT_EQ(count_kind(c, LayerKind::Softmax), 1u);
    EXPECT_EQ(count_kind(c, LayerKind::MaxPool), 6u);
    std::size_t mish = 0, conv_seen = 0;
    for (const LayerSpec& l : c.layers) {
        if (l.kind != LayerKind::Conv) continue;
        ++conv_seen;
        if (l.activation == ActivationKind::Mish) {
            ++mish;
            EXPECT_LE(conv_seen, 15u);
        }
    }
    EXPECT_EQ(mish, 15u);
    EXPECT_EQ(c.grid_size, 7u);
    EXPECT_EQ(c.cell_width(), 11u);
}

TEST(NetworkConfig, DeskPresetTracesToSeven) {
    const NetworkConfig c = desk_network_config();
    EXPECT_EQ(c.input_size, 112u);
    EXPECT_EQ(count_kind(c, LayerKind::Conv), 16u);
    const auto trace = validate(c);
    ASSERT_EQ(trace.size(), c.layers.size());
}

TEST(NetworkConfig, TextRoundTrip) {
    for (const NetworkConfig& c : {default_network_config(), desk_network_config()})
        EXPECT_EQ(parse_network_config(to_text(c)), c);
}

TEST(NetworkConfig, ShippedFilesMatchPresets) {
    EXPECT_EQ(load_network_config(GDK_SOURCE_DIR "/configs/default.cfg"), default_network_config());
    EXPECT_EQ(load_network_config(GDK_SOURCE_DIR "/configs/desk.cfg"), desk_network_config());
    EXPECT_EQ(resolve_network_config("preset:desk"), desk_network_config());
}

TEST(NetworkConfig, UnknownDirectiveHasLineNumber) {
    EXPECT_NE(error_of("input 16\nconv 4 3 1 1 mish\nwarp 3\n").find("net.cfg:3:"), std::string::npos);
    EXPECT_THROW(parse_network_config("input 16\nconv 4 3 1 1 swish\n"), ParseError);
    EXPECT_THROW(parse_network_config("input 16\nconv 4 3 1 mish\n"), ParseError);
}

TEST(NetworkConfig, DirectiveAfterHeadRejected) {
    EXPECT_THROW(parse_network_config("input 8\npool 2 2\npool 2 2\nfc 4\nhead 2 1 1\nfc 3\n"), ParseError);
}

TEST(NetworkConfig, GridMismatchNamesLayer) {
    const std::string msg = error_of("input 16\nconv 2 3 1 1 mish\npool 2 2\nfc 8\nhead 7 2 1\n");
    EXPECT_NE(msg.find("layer 2 (pool)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("8x8"), std::string::npos) << msg;
}

TEST(NetworkConfig, PoolLargerThanInputRejected) {
    EXPECT_THROW(parse_network_config("input 4\npool 8 8\nfc 4\nhead 1 1 1\n"), ConfigError);
}

TEST(Network, SameSeedSameParameters) {
    const auto a = Network<float>::build(desk_network_config(), 3);
    const auto b = Network<float>::build(desk_network_config(), 3);
    const auto c = Network<float>::build(desk_network_config(), 4);
    EXPECT_EQ(a.parameters(), b.parameters());
    EXPECT_NE(a.parameters(), c.parameters());
}

TEST(Network, ParameterNames) {
    const auto net = Network<float>::build(desk_network_config(), 0);
    const auto& names = net.parameter_names();
    ASSERT_EQ(names.size(), 2u * (16 + 2));
    EXPECT_EQ(names.front(), "conv0.weight");
    EXPECT_EQ(names[32], "fc0.weight");
    EXPECT_EQ(names.back(), "head.bias");
}

TEST(Network, InitializationBoundsAndZeroBias) {
    const auto net = Network<double>::build(desk_network_config(), 1);
    const auto& names = net.parameter_names();
    const auto& params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (names[i].ends_with(".bias")) {
            for (double v : params[i].data()) EXPECT_EQ(v, 0.0);
            continue;
        }
        const Shape& s = params[i].shape();
        const double fan_in = s.size() == 4 ? static_cast<double>(s[1] * s[2] * s[3]) : static_cast<double>(s[0]);
        const double bound = std::sqrt(6.0 / fan_in);
        for (double v : params[i].data()) ASSERT_LE(std::abs(v), bound);
    }
}

TEST(Network, DeskOutputShapeAndDeterminism) {
    const auto net = Network<float>::build(desk_network_config(), 2);
    Tensor image({1, 3, 112, 112});
    for (std::size_t i = 0; i < image.size(); ++i) image[i] = static_cast<float>((i * 37) % 255) / 255.0f;
    const GridPrediction a = net.predict(image);
    EXPECT_EQ(a.values.shape(), (Shape{7, 7, 11}));
    EXPECT_EQ(a.values, net.predict(image).values);
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t c = 0; c < 7; ++c)
            for (std::size_t b = 0; b < 2; ++b) {
                for (std::size_t k : {0u, 1u, 4u}) {
                    EXPECT_GE(a.at(r, c, b * 5 + k), 0.0);
                    EXPECT_LE(a.at(r, c, b * 5 + k), 1.0);
                }
                EXPECT_GE(a.at(r, c, b * 5 + 2), 0.0);
                EXPECT_GE(a.at(r, c, b * 5 + 3), 0.0);
            }
}

TEST(Network, DefaultZeroImageIsFinite) {
    const auto net = Network<float>::build(default_network_config(), 0);
    const Tensor raw = net.forward_raw(Tensor({1, 3, 448, 448}));
    EXPECT_EQ(raw.shape(), (Shape{1, 7 * 7 * 11}));
    EXPECT_TRUE(raw.all_finite());
}

TEST(Network, WrongInputSize) {
    const auto net = Network<float>::build(desk_network_config(), 0);
    EXPECT_THROW(net.forward_raw(Tensor({1, 3, 64, 64})), UsageError);
}

TEST(Network, NamedTensorRoundTrip) {
    const auto a = Network<float>::build(desk_network_config(), 5);
    auto b = Network<float>::build(desk_network_config(), 6);
    b.load_named_tensors(a.to_named_tensors());
    EXPECT_EQ(a.parameters(), b.parameters());
    auto tensors = a.to_named_tensors();
    tensors.pop_back();
    EXPECT_THROW(b.load_named_tensors(tensors), ConfigError);
}

TEST(Decode, EmptyWhenNothingConfident) {
    const GridPrediction g = GridPrediction::zeros(7, 2, 1);
    EXPECT_TRUE(decode_predictions(g, 0.25).empty());
    EXPECT_THROW(decode_predictions(g, 1.5), UsageError);
}

TEST(Decode, CenterCell) {
    GridPrediction g = GridPrediction::zeros(7, 2, 1);
    g.at(3, 3, 0) = 0.5;
    g.at(3, 3, 1) = 0.5;
    g.at(3, 3, 2) = 0.04;
    g.at(3, 3, 3) = 0.09;
    g.at(3, 3, 4) = 0.9;
    const auto boxes = decode_predictions(g, 0.25);
    ASSERT_EQ(boxes.size(), 1u);
    EXPECT_DOUBLE_EQ(boxes[0].cx, 0.5);
    EXPECT_DOUBLE_EQ(boxes[0].cy, 0.5);
    EXPECT_DOUBLE_EQ(boxes[0].w, 0.04);
    EXPECT_DOUBLE_EQ(boxes[0].confidence, 0.9);
}

TEST(Decode, HandBuiltGrid) {
    GridPrediction g = GridPrediction::zeros(4, 2, 2);
    auto set = [&](std::size_t r, std::size_t c, std::size_t b, double x, double y, double conf) {
        g.at(r, c, b * 5 + 0) = x;
        g.at(r, c, b * 5 + 1) = y;
        g.at(r, c, b * 5 + 2) = 0.1;
        g.at(r, c, b * 5 + 3) = 0.2;
        g.at(r, c, b * 5 + 4) = conf;
    };
    set(0, 1, 0, 0.25, 0.75, 0.6);
    set(2, 3, 1, 0.5, 0.5, 0.3);
    set(3, 0, 0, 1.0, 0.0, 0.95);
    set(1, 1, 1, 0.5, 0.5, 0.29);  // below threshold
    g.at(2, 3, 11) = 0.7;          // class 1 wins in that cell
    g.at(2, 3, 10) = 0.3;
    const auto boxes = decode_predictions(g, 0.3);
    ASSERT_EQ(boxes.size(), 3u);
    EXPECT_DOUBLE_EQ(boxes[0].cx, (1 + 0.25) / 4);
    EXPECT_DOUBLE_EQ(boxes[0].cy, (0 + 0.75) / 4);
    EXPECT_DOUBLE_EQ(boxes[1].cx, (3 + 0.5) / 4);
    EXPECT_DOUBLE_EQ(boxes[1].cy, (2 + 0.5) / 4);
    EXPECT_EQ(boxes[1].class_id, 1);
    EXPECT_DOUBLE_EQ(boxes[2].cx, 0.25);
    EXPECT_DOUBLE_EQ(boxes[2].cy, 0.75);
}

TEST(Detect, UntrainedHighThresholdNeverThrows) {
    const auto net = Network<float>::build(desk_network_config(), 0);
    EXPECT_NO_THROW((void)detect(net, Tensor({1, 3, 112, 112}, 0.5f), 0.999, 0.45));
}
