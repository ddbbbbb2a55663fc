#pragma once

// Offline photometric and geometric augmentation with exact label re-mapping.
// Each source image yields the original plus ten variants:
//   noise, rot90, rot180, rot270, zoom_in, zoom_out, bright, dark, shear_x, shear_y

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gdk/box.hpp"
#include "gdk/image.hpp"

namespace gdk {

struct AugmentRecipe {
    double noise_sigma = 1.0;
    double zoom_in = 0.30;
    double zoom_out = 0.10;
    int bright_delta = 40;
    int dark_delta = 40;
    double contrast = 1.2;
    double shear_x = 0.2;
    double shear_y = 0.2;
    double min_visible = 0.2;  // boxes keeping less of their area after cropping are dropped
};

/// key=value lines; keys as the field names above. '#' comments allowed.
AugmentRecipe parse_recipe(std::string_view text, const std::string& source = "<recipe>");
AugmentRecipe load_recipe(const std::filesystem::path& path);

/// An image with its labels and optional mask, transformed together.
struct LabeledImage {
    Image image;
    std::vector<BBox> boxes;
    std::optional<GrayImage> mask;
};

enum class ZoomDirection { In, Out };
enum class ShearAxis { X, Y };

Image gaussian_noise(const Image& image, double sigma, std::uint64_t seed);
Image brightness(const Image& image, int delta);
/// p -> 128 + factor * (p - 128), clamped.
Image contrast(const Image& image, double factor);

/// Clockwise rotation by 90, 180 or 270 degrees. Lossless.
LabeledImage rotate(const LabeledImage& input, int angle);
BBox rotate_box(const BBox& box, int angle);

/// In: center crop to (1 - pct) of each extent, resampled back to full size.
/// Out: content shrunk to (1 - pct), border filled by edge replication.
LabeledImage zoom(const LabeledImage& input, double pct, ZoomDirection direction, double min_visible = 0.2);
/// The re-mapped, clipped box, or nullopt when less than `min_visible` of it survives.
std::optional<BBox> zoom_box(const BBox& box, double pct, ZoomDirection direction, double min_visible = 0.2);

/// X: x' = x + factor (y - 1/2); Y: y' = y + factor (x - 1/2), in normalized coordinates.
LabeledImage shear(const LabeledImage& input, ShearAxis axis, double factor, double min_visible = 0.2);
std::optional<BBox> shear_box(const BBox& box, ShearAxis axis, double factor, double min_visible = 0.2);

struct AugmentSummary {
    std::filesystem::path manifest;
    std::size_t inputs = 0;
    std::size_t processed = 0;
    std::size_t skipped_inputs = 0;
    std::size_t skipped_variants = 0;
    std::size_t outputs = 0;
    std::vector<std::string> warnings;
};

/// Expands every sample of the dataset at `in_dir` into `out_dir` (same layout) and writes
/// `out_dir/manifest.csv` with rows "output_path,source_path,op_name,parameters"; paths are
/// relative to the output and input roots respectively.
AugmentSummary augment_dataset(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                               const AugmentRecipe& recipe, std::uint64_t seed);

}  // namespace gdk
