#include "gdk/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "gdk/dataset.hpp"
#include "gdk/error.hpp"

namespace gdk {
namespace fs = std::filesystem;

namespace {

std::uint8_t clamp_pixel(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// Builds an output image by pulling each destination pixel from a normalized source location.
// `source` maps a destination normalized point to a source normalized point.
using PointMap = std::function<std::pair<double, double>(double, double)>;

Image resample(const Image& src, const PointMap& source) {
    Image out(src.width, src.height);
    const double W = static_cast<double>(src.width), H = static_cast<double>(src.height);
    for (std::size_t y = 0; y < src.height; ++y) {
        for (std::size_t x = 0; x < src.width; ++x) {
            const auto [sxn, syn] = source((static_cast<double>(x) + 0.5) / W, (static_cast<double>(y) + 0.5) / H);
            const double fx = std::clamp(sxn * W - 0.5, 0.0, W - 1.0);
            const double fy = std::clamp(syn * H - 0.5, 0.0, H - 1.0);
            const auto x0 = static_cast<std::size_t>(fx), y0 = static_cast<std::size_t>(fy);
            const std::size_t x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
            const double tx = fx - static_cast<double>(x0), ty = fy - static_cast<double>(y0);
            for (std::size_t c = 0; c < 3; ++c) {
                const double top = (1 - tx) * src.at(x0, y0, c) + tx * src.at(x1, y0, c);
                const double bottom = (1 - tx) * src.at(x0, y1, c) + tx * src.at(x1, y1, c);
                out.at(x, y, c) = clamp_pixel((1 - ty) * top + ty * bottom);
            }
        }
    }
    return out;
}

GrayImage resample_mask(const GrayImage& src, const PointMap& source) {
    GrayImage out(src.width, src.height);
    const double W = static_cast<double>(src.width), H = static_cast<double>(src.height);
    for (std::size_t y = 0; y < src.height; ++y) {
        for (std::size_t x = 0; x < src.width; ++x) {
            const auto [sxn, syn] = source((static_cast<double>(x) + 0.5) / W, (static_cast<double>(y) + 0.5) / H);
            const auto sx = static_cast<std::size_t>(std::clamp(std::floor(sxn * W), 0.0, W - 1.0));
            const auto sy = static_cast<std::size_t>(std::clamp(std::floor(syn * H), 0.0, H - 1.0));
            out.at(x, y) = src.at(sx, sy);
        }
    }
    return out;
}

// Clips corners to the unit square; nullopt when the kept area fraction is below min_visible.
std::optional<BBox> clip_box(double x1, double y1, double x2, double y2, const BBox& like, double min_visible) {
    const double area = (x2 - x1) * (y2 - y1);
    const double cx1 = std::clamp(x1, 0.0, 1.0), cy1 = std::clamp(y1, 0.0, 1.0);
    const double cx2 = std::clamp(x2, 0.0, 1.0), cy2 = std::clamp(y2, 0.0, 1.0);
    const double kept = (cx2 - cx1) * (cy2 - cy1);
    if (area > 0.0 ? kept < min_visible * area || kept <= 0.0 : (cx2 < cx1 || cy2 < cy1)) return std::nullopt;
    return BBox::from_corners(cx1, cy1, cx2, cy2, like.confidence, like.class_id);
}

template <typename Pixel, typename Img>
Img rotate_pixels(const Img& src, int angle, std::size_t channels) {
    const bool swap = angle == 90 || angle == 270;
    Img out;
    out.width = swap ? src.height : src.width;
    out.height = swap ? src.width : src.height;
    out.pixels.resize(src.pixels.size());
    for (std::size_t y = 0; y < src.height; ++y) {
        for (std::size_t x = 0; x < src.width; ++x) {
            std::size_t nx = x, ny = y;
            if (angle == 90) {
                nx = src.height - 1 - y;
                ny = x;
            } else if (angle == 180) {
                nx = src.width - 1 - x;
                ny = src.height - 1 - y;
            } else if (angle == 270) {
                nx = y;
                ny = src.width - 1 - x;
            }
            for (std::size_t c = 0; c < channels; ++c)
                out.pixels[(ny * out.width + nx) * channels + c] = src.pixels[(y * src.width + x) * channels + c];
        }
    }
    return out;
}

void require_angle(int angle) {
    if (angle != 90 && angle != 180 && angle != 270) throw UsageError("rotation angle must be 90, 180 or 270");
}

double zoom_scale(double pct, ZoomDirection direction) {
    if (!(pct > 0.0 && pct < 1.0)) throw UsageError("zoom percentage must lie in (0, 1)");
    return direction == ZoomDirection::In ? 1.0 - pct : 1.0 / (1.0 - pct);
}

void require_shear(double factor) {
    if (!(std::abs(factor) < 1.0)) throw UsageError("shear factor must satisfy |factor| < 1");
}

std::string format_double(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

}  // namespace

AugmentRecipe parse_recipe(std::string_view text, const std::string& source) {
    AugmentRecipe r;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(source, line_no, "expected key=value");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw ParseError(source, line_no, "value for '" + key + "' is not a number");
        }
        if (key == "noise_sigma") r.noise_sigma = v;
        else if (key == "zoom_in") r.zoom_in = v;
        else if (key == "zoom_out") r.zoom_out = v;
        else if (key == "bright_delta") r.bright_delta = static_cast<int>(v);
        else if (key == "dark_delta") r.dark_delta = static_cast<int>(v);
        else if (key == "contrast") r.contrast = v;
        else if (key == "shear_x") r.shear_x = v;
        else if (key == "shear_y") r.shear_y = v;
        else if (key == "min_visible") r.min_visible = v;
        else throw ParseError(source, line_no, "unknown recipe key '" + key + "'");
    }
    if (!(r.noise_sigma > 0.0)) throw ValidationError(source + ": noise_sigma must be positive");
    if (!(r.zoom_in > 0.0 && r.zoom_in < 1.0) || !(r.zoom_out > 0.0 && r.zoom_out < 1.0))
        throw ValidationError(source + ": zoom percentages must lie in (0, 1)");
    if (!(std::abs(r.shear_x) < 1.0) || !(std::abs(r.shear_y) < 1.0))
        throw ValidationError(source + ": shear factors must satisfy |factor| < 1");
    if (!(r.contrast > 0.0)) throw ValidationError(source + ": contrast must be positive");
    return r;
}

AugmentRecipe load_recipe(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open recipe: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_recipe(buffer.str(), path.string());
}

Image gaussian_noise(const Image& image, double sigma, std::uint64_t seed) {
    if (!(sigma > 0.0)) throw UsageError("noise sigma must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    Image out = image;
    for (auto& p : out.pixels) p = clamp_pixel(static_cast<double>(p) + noise(rng));
    return out;
}

Image brightness(const Image& image, int delta) {
    Image out = image;
    for (auto& p : out.pixels) p = clamp_pixel(static_cast<double>(p) + delta);
    return out;
}

Image contrast(const Image& image, double factor) {
    Image out = image;
    for (auto& p : out.pixels) p = clamp_pixel(128.0 + factor * (static_cast<double>(p) - 128.0));
    return out;
}

BBox rotate_box(const BBox& b, int angle) {
    require_angle(angle);
    BBox r = b;
    switch (angle) {
        case 90: r.cx = 1.0 - b.cy; r.cy = b.cx; r.w = b.h; r.h = b.w; break;
        case 180: r.cx = 1.0 - b.cx; r.cy = 1.0 - b.cy; break;
        case 270: r.cx = b.cy; r.cy = 1.0 - b.cx; r.w = b.h; r.h = b.w; break;
    }
    return r;
}

LabeledImage rotate(const LabeledImage& input, int angle) {
    require_angle(angle);
    LabeledImage out;
    out.image = rotate_pixels<std::uint8_t>(input.image, angle, 3);
    if (input.mask) out.mask = rotate_pixels<std::uint8_t>(*input.mask, angle, 1);
    for (const BBox& b : input.boxes) out.boxes.push_back(rotate_box(b, angle));
    return out;
}

std::optional<BBox> zoom_box(const BBox& b, double pct, ZoomDirection direction, double min_visible) {
    const double s = zoom_scale(pct, direction);
    auto map = [s](double v) { return 0.5 + (v - 0.5) / s; };
    return clip_box(map(b.x1()), map(b.y1()), map(b.x2()), map(b.y2()), b, min_visible);
}

LabeledImage zoom(const LabeledImage& input, double pct, ZoomDirection direction, double min_visible) {
    const double s = zoom_scale(pct, direction);
    const PointMap source = [s](double x, double y) {
        return std::pair{0.5 + (x - 0.5) * s, 0.5 + (y - 0.5) * s};
    };
    LabeledImage out;
    out.image = resample(input.image, source);
    if (input.mask) out.mask = resample_mask(*input.mask, source);
    for (const BBox& b : input.boxes)
        if (auto m = zoom_box(b, pct, direction, min_visible)) out.boxes.push_back(*m);
    return out;
}

std::optional<BBox> shear_box(const BBox& b, ShearAxis axis, double factor, double min_visible) {
    require_shear(factor);
    double x1 = b.x1(), x2 = b.x2(), y1 = b.y1(), y2 = b.y2();
    // An affine shear maps the box to a parallelogram; its hull is spanned by the extreme corners.
    if (axis == ShearAxis::X) {
        const double a = factor * (y1 - 0.5), c = factor * (y2 - 0.5);
        x1 += std::min(a, c);
        x2 += std::max(a, c);
    } else {
        const double a = factor * (x1 - 0.5), c = factor * (x2 - 0.5);
        y1 += std::min(a, c);
        y2 += std::max(a, c);
    }
    return clip_box(x1, y1, x2, y2, b, min_visible);
}

LabeledImage shear(const LabeledImage& input, ShearAxis axis, double factor, double min_visible) {
    require_shear(factor);
    const PointMap source = [axis, factor](double x, double y) {
        return axis == ShearAxis::X ? std::pair{x - factor * (y - 0.5), y} : std::pair{x, y - factor * (x - 0.5)};
    };
    LabeledImage out;
    out.image = resample(input.image, source);
    if (input.mask) out.mask = resample_mask(*input.mask, source);
    for (const BBox& b : input.boxes)
        if (auto m = shear_box(b, axis, factor, min_visible)) out.boxes.push_back(*m);
    return out;
}

AugmentSummary augment_dataset(const fs::path& in_dir, const fs::path& out_dir, const AugmentRecipe& recipe,
                               std::uint64_t seed) {
    AugmentSummary summary;
    const fs::path image_dir = in_dir / "images";
    if (!fs::is_directory(image_dir)) throw UsageError("input dataset has no images/ directory: " + in_dir.string());
    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(image_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") inputs.push_back(entry.path());
    std::sort(inputs.begin(), inputs.end());

    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "labels");
    summary.manifest = out_dir / "manifest.csv";
    std::ofstream manifest(summary.manifest, std::ios::trunc);
    if (!manifest) throw Error("cannot write manifest: " + summary.manifest.string());

    for (const fs::path& image_path : inputs) {
        ++summary.inputs;
        const std::string stem = image_path.stem().string();
        LabeledImage source;
        try {
            source.image = load_image(image_path);
            const fs::path label_path = in_dir / "labels" / (stem + ".txt");
            if (!fs::exists(label_path)) throw UsageError("no label file");
            source.boxes = parse_label_file(label_path);
            for (const char* ext : {".ppm", ".pgm"}) {
                const fs::path mask_path = in_dir / "masks" / (stem + ext);
                if (fs::exists(mask_path)) {
                    source.mask = load_mask(mask_path);
                    break;
                }
            }
        } catch (const Error& e) {
            summary.warnings.push_back("skipping " + image_path.string() + ": " + e.what());
            ++summary.skipped_inputs;
            continue;
        }
        ++summary.processed;

        auto noise_seed = [&](const char* op) { return stable_hash(image_path.filename().string() + "/" + op, seed); };
        auto photometric = [&](Image img) {
            LabeledImage v;
            v.image = std::move(img);
            v.boxes = source.boxes;
            v.mask = source.mask;
            return v;
        };
        struct Variant {
            std::string op;
            std::string params;
            std::function<LabeledImage()> make;
        };
        const std::vector<Variant> variants = {
            {"original", "-", [&] { return source; }},
            {"noise", "sigma=" + format_double(recipe.noise_sigma),
             [&] { return photometric(gaussian_noise(source.image, recipe.noise_sigma, noise_seed("noise"))); }},
            {"rot90", "angle=90", [&] { return rotate(source, 90); }},
            {"rot180", "angle=180", [&] { return rotate(source, 180); }},
            {"rot270", "angle=270", [&] { return rotate(source, 270); }},
            {"zoom_in", "pct=" + format_double(recipe.zoom_in),
             [&] { return zoom(source, recipe.zoom_in, ZoomDirection::In, recipe.min_visible); }},
            {"zoom_out", "pct=" + format_double(recipe.zoom_out),
             [&] { return zoom(source, recipe.zoom_out, ZoomDirection::Out, recipe.min_visible); }},
            {"bright", "delta=" + std::to_string(recipe.bright_delta) + ";contrast=" + format_double(recipe.contrast),
             [&] { return photometric(contrast(brightness(source.image, recipe.bright_delta), recipe.contrast)); }},
            {"dark", "delta=-" + std::to_string(recipe.dark_delta) + ";contrast=" + format_double(recipe.contrast),
             [&] { return photometric(contrast(brightness(source.image, -recipe.dark_delta), recipe.contrast)); }},
            {"shear_x", "factor=" + format_double(recipe.shear_x),
             [&] { return shear(source, ShearAxis::X, recipe.shear_x, recipe.min_visible); }},
            {"shear_y", "factor=" + format_double(recipe.shear_y),
             [&] { return shear(source, ShearAxis::Y, recipe.shear_y, recipe.min_visible); }},
        };

        for (const Variant& variant : variants) {
            LabeledImage out = variant.make();
            if (!source.boxes.empty() && out.boxes.empty()) {
                summary.warnings.push_back("skipping variant " + variant.op + " of " + image_path.string() +
                                           ": no box survives the transform");
                ++summary.skipped_variants;
                continue;
            }
            const std::string out_stem = stem + "_" + variant.op;
            const fs::path out_image = out_dir / "images" / (out_stem + ".ppm");
            save_image(out_image, out.image);
            write_label_file(out_dir / "labels" / (out_stem + ".txt"), out.boxes);
            if (out.mask) {
                fs::create_directories(out_dir / "masks");
                save_mask(out_dir / "masks" / (out_stem + ".ppm"), *out.mask);
            }
            manifest << (fs::path("images") / out_image.filename()).string() << ','
                     << (fs::path("images") / image_path.filename()).string() << ',' << variant.op << ','
                     << variant.params << '\n';
            ++summary.outputs;
        }
    }
    return summary;
}

}  // namespace gdk
