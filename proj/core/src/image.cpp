#include "gdk/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "gdk/error.hpp"

namespace gdk {
namespace {

constexpr std::size_t kMaxDimension = 1u << 15;

void skip_space_and_comments(std::istream& in) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

std::size_t read_header_number(std::istream& in, const char* what) {
    skip_space_and_comments(in);
    std::size_t value = 0;
    bool any = false;
    while (std::isdigit(in.peek())) {
        value = value * 10 + static_cast<std::size_t>(in.get() - '0');
        any = true;
        if (value > kMaxDimension * kMaxDimension) throw FormatError(std::string("PNM ") + what + " too large");
    }
    if (!any) throw FormatError(std::string("PNM header: expected ") + what);
    return value;
}

struct PnmHeader {
    char kind = 0;  // '5' or '6'
    std::size_t width = 0;
    std::size_t height = 0;
};

PnmHeader read_header(std::istream& in) {
    char magic[2] = {0, 0};
    if (!in.read(magic, 2) || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw FormatError("not a binary PNM file (expected P5 or P6 magic)");
    PnmHeader h;
    h.kind = magic[1];
    h.width = read_header_number(in, "width");
    h.height = read_header_number(in, "height");
    const std::size_t maxval = read_header_number(in, "maxval");
    if (h.width == 0 || h.height == 0 || h.width > kMaxDimension || h.height > kMaxDimension)
        throw FormatError("PNM dimensions out of range");
    if (maxval != 255) throw FormatError("only maxval 255 is supported");
    const int sep = in.get();
    if (sep != ' ' && sep != '\n' && sep != '\t' && sep != '\r') throw FormatError("PNM header not terminated");
    return h;
}

std::vector<std::uint8_t> read_payload(std::istream& in, std::size_t bytes) {
    std::vector<std::uint8_t> data(bytes);
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes)))
        throw FormatError("PNM pixel data truncated");
    return data;
}

double clamp_coord(double v, std::size_t extent) {
    return std::clamp(v, 0.0, static_cast<double>(extent - 1));
}

}  // namespace

Image::Image(std::size_t w, std::size_t h, std::uint8_t fill) : width(w), height(h), pixels(w * h * 3, fill) {}

GrayImage::GrayImage(std::size_t w, std::size_t h, std::uint8_t fill) : width(w), height(h), pixels(w * h, fill) {}

Image read_ppm(std::istream& in) {
    const PnmHeader h = read_header(in);
    if (h.kind != '6') throw FormatError("expected a P6 color image");
    Image image;
    image.width = h.width;
    image.height = h.height;
    image.pixels = read_payload(in, h.width * h.height * 3);
    return image;
}

void write_ppm(std::ostream& out, const Image& image) {
    if (image.pixels.size() != image.width * image.height * 3) throw UsageError("image pixel count mismatch");
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw Error("failed writing PPM");
}

GrayImage read_pgm(std::istream& in) {
    const PnmHeader h = read_header(in);
    if (h.kind != '5') throw FormatError("expected a P5 grayscale image");
    GrayImage image;
    image.width = h.width;
    image.height = h.height;
    image.pixels = read_payload(in, h.width * h.height);
    return image;
}

void write_pgm(std::ostream& out, const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height) throw UsageError("mask pixel count mismatch");
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw Error("failed writing PGM");
}

namespace {

void make_parent(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open image: " + path.string());
    try {
        return read_ppm(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_image(const std::filesystem::path& path, const Image& image) {
    make_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write image: " + path.string());
    write_ppm(out, image);
}

GrayImage load_mask(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open mask: " + path.string());
    try {
        const PnmHeader h = read_header(in);
        GrayImage mask;
        mask.width = h.width;
        mask.height = h.height;
        if (h.kind == '5') {
            mask.pixels = read_payload(in, h.width * h.height);
        } else {
            const auto rgb = read_payload(in, h.width * h.height * 3);
            mask.pixels.resize(h.width * h.height);
            for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
                const bool set = rgb[i * 3] >= 128 || rgb[i * 3 + 1] >= 128 || rgb[i * 3 + 2] >= 128;
                mask.pixels[i] = set ? 255 : 0;
            }
        }
        return mask;
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_mask(const std::filesystem::path& path, const GrayImage& mask) {
    make_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write mask: " + path.string());
    write_pgm(out, mask);
}

Image resize_bilinear(const Image& image, std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) throw UsageError("resize target must be non-empty");
    if (width == image.width && height == image.height) return image;
    Image out(width, height);
    const double sx = static_cast<double>(image.width) / static_cast<double>(width);
    const double sy = static_cast<double>(image.height) / static_cast<double>(height);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = clamp_coord((static_cast<double>(y) + 0.5) * sy - 0.5, image.height);
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, image.height - 1);
        const double ty = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = clamp_coord((static_cast<double>(x) + 0.5) * sx - 0.5, image.width);
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, image.width - 1);
            const double tx = fx - static_cast<double>(x0);
            for (std::size_t c = 0; c < 3; ++c) {
                const double top = (1 - tx) * image.at(x0, y0, c) + tx * image.at(x1, y0, c);
                const double bottom = (1 - tx) * image.at(x0, y1, c) + tx * image.at(x1, y1, c);
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround((1 - ty) * top + ty * bottom));
            }
        }
    }
    return out;
}

GrayImage resize_nearest(const GrayImage& image, std::size_t width, std::size_t height) {
    if (width == 0 || height == 0) throw UsageError("resize target must be non-empty");
    if (width == image.width && height == image.height) return image;
    GrayImage out(width, height);
    for (std::size_t y = 0; y < height; ++y) {
        const std::size_t sy = std::min(y * image.height / height, image.height - 1);
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t sx = std::min(x * image.width / width, image.width - 1);
            out.at(x, y) = image.at(sx, sy);
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> image_to_tensor(const Image& image) {
    BasicTensor<T> t({1, 3, image.height, image.width});
    const std::size_t plane = image.width * image.height;
    for (std::size_t i = 0; i < plane; ++i)
        for (std::size_t c = 0; c < 3; ++c) t[c * plane + i] = static_cast<T>(image.pixels[i * 3 + c]) / T(255);
    return t;
}

template Tensor image_to_tensor<float>(const Image&);
template Tensor64 image_to_tensor<double>(const Image&);

}  // namespace gdk
