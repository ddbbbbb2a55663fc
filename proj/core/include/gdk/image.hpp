#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "gdk/tensor.hpp"

namespace gdk {

/// 8-bit interleaved RGB, row-major.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // width * height * 3

    Image() = default;
    Image(std::size_t width, std::size_t height, std::uint8_t fill = 0);

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return pixels[(y * width + x) * 3 + c]; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// 8-bit single channel, row-major. Used for ground-truth masks.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(std::size_t width, std::size_t height, std::uint8_t fill = 0);

    std::uint8_t& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary PPM ("P6", maxval 255). Throws FormatError on anything else or truncation.
Image read_ppm(std::istream& in);
void write_ppm(std::ostream& out, const Image& image);
Image load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Image& image);

/// Binary PGM ("P5", maxval 255). load_mask also accepts a P6 file (any channel >= 128 is set).
GrayImage read_pgm(std::istream& in);
void write_pgm(std::ostream& out, const GrayImage& image);
GrayImage load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const GrayImage& mask);

/// Samples with half-pixel centers: source coordinate = (dst + 0.5) * scale - 0.5, clamped to the edge.
Image resize_bilinear(const Image& image, std::size_t width, std::size_t height);
GrayImage resize_nearest(const GrayImage& image, std::size_t width, std::size_t height);

/// [1, 3, H, W] with values in [0, 1].
template <typename T>
BasicTensor<T> image_to_tensor(const Image& image);

}  // namespace gdk
