#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "gdk/error.hpp"
#include "gdk/image.hpp"
#include "oracles.hpp"

using namespace gdk;

TEST(Ppm, TwoByTwoExactPixels) {
    const std::string file = std::string("P6\n2 2\n255\n") + std::string("\x01\x02\x03\x04\x05\x06\x07\x08\x09\x0a\x0b\xff", 12);
    std::istringstream in(file);
    const Image img = read_ppm(in);
    ASSERT_EQ(img.width, 2u);
    ASSERT_EQ(img.height, 2u);
    EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 255}));
    EXPECT_EQ(img.at(1, 1, 2), 255);
}

TEST(Ppm, HeaderCommentsAccepted) {
    std::istringstream in(std::string("P6 # comment\n1 1\n# another\n255\n") + std::string("\x10\x20\x30", 3));
    EXPECT_EQ(read_ppm(in).pixels, (std::vector<std::uint8_t>{0x10, 0x20, 0x30}));
}

TEST(Ppm, RandomRoundTripIsBitIdentical) {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> byte(0, 255);
    Image img(13, 7);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(byte(rng));
    oracle::TempDir dir("ppm");
    save_image(dir / "x.ppm", img);
    EXPECT_EQ(load_image(dir / "x.ppm"), img);
}

TEST(Ppm, TruncatedAndBadMagic) {
    std::istringstream truncated(std::string("P6\n2 2\n255\n") + std::string(11, '\x01'));
    EXPECT_THROW(read_ppm(truncated), FormatError);
    std::istringstream ascii("P3\n1 1\n255\n1 2 3\n");
    EXPECT_THROW(read_ppm(ascii), FormatError);
    std::istringstream depth("P6\n1 1\n65535\n");
    EXPECT_THROW(read_ppm(depth), FormatError);
    oracle::TempDir dir("ppm_missing");
    EXPECT_THROW(load_image(dir / "missing.ppm"), FormatError);
}

TEST(Pgm, MaskRoundTripAndColorMask) {
    GrayImage m(5, 4);
    m.at(2, 1) = 255;
    m.at(4, 3) = 130;
    oracle::TempDir dir("pgm");
    save_mask(dir / "m.ppm", m);
    EXPECT_EQ(load_mask(dir / "m.ppm"), m);
    Image color(2, 1);
    color.at(1, 0, 1) = 200;
    save_image(dir / "c.ppm", color);
    const GrayImage fromColor = load_mask(dir / "c.ppm");
    EXPECT_EQ(fromColor.at(0, 0), 0);
    EXPECT_GE(fromColor.at(1, 0), 128);
}

TEST(Resize, IdentityAndConstant) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> byte(0, 255);
    Image img(9, 6);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(byte(rng));
    EXPECT_EQ(resize_bilinear(img, 9, 6), img);
    const Image flat(10, 10, 77);
    const Image big = resize_bilinear(flat, 23, 17);
    for (auto p : big.pixels) EXPECT_EQ(p, 77);
}

TEST(Resize, DownsampleAveragesPairs) {
    Image img(4, 1);
    const std::uint8_t row[4] = {0, 100, 200, 50};
    for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t c = 0; c < 3; ++c) img.at(x, 0, c) = row[x];
    const Image half = resize_bilinear(img, 2, 1);
    EXPECT_EQ(half.at(0, 0, 0), 50);
    EXPECT_EQ(half.at(1, 0, 0), 125);
}

TEST(ImageTensor, LayoutAndScale) {
    Image img(2, 1);
    img.at(1, 0, 2) = 255;
    img.at(0, 0, 0) = 51;
    const Tensor t = image_to_tensor<float>(img);
    EXPECT_EQ(t.shape(), (Shape{1, 3, 1, 2}));
    EXPECT_FLOAT_EQ(t.at({0, 0, 0, 0}), 0.2f);
    EXPECT_FLOAT_EQ(t.at({0, 2, 0, 1}), 1.0f);
}
