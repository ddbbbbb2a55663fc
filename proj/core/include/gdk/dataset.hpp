#pragma once

// On-disk dataset layout:
//   <root>/images/<stem>.ppm     binary P6
//   <root>/labels/<stem>.txt     one "class_id cx cy w h" line per box, normalized
//   <root>/masks/<stem>.ppm      optional ground-truth mask (P5; .pgm also accepted)
//   <root>/split.txt             optional "<image file name> train|test" per line

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gdk/box.hpp"
#include "gdk/image.hpp"

namespace gdk {

enum class SplitTag { Train, Test };

std::string_view split_tag_name(SplitTag tag);

struct Sample {
    std::filesystem::path image;
    std::filesystem::path label;
    std::optional<std::filesystem::path> mask;
    std::vector<BBox> boxes;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<Sample> samples;
    std::vector<SplitTag> split;  // empty until assigned; otherwise one tag per sample

    std::vector<Sample> subset(SplitTag tag) const;
};

std::vector<BBox> parse_labels(std::string_view text, const std::string& source = "<labels>");
std::vector<BBox> parse_label_file(const std::filesystem::path& path);
/// Six decimal places per value.
std::string format_labels(const std::vector<BBox>& boxes);
void write_label_file(const std::filesystem::path& path, const std::vector<BBox>& boxes);

/// Scans <root>/images. Images without a label file are skipped and reported in `warnings`.
/// Applies <root>/split.txt when present.
DatasetManifest load_dataset(const std::filesystem::path& root, std::vector<std::string>* warnings = nullptr);

/// Seeded shuffle, then the first ceil(fraction * n) samples go to train.
DatasetManifest split_dataset(DatasetManifest manifest, double train_fraction, std::uint64_t seed);

void write_split_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
/// Assigns tags from a split manifest; every sample must be listed.
void apply_split_manifest(const std::filesystem::path& path, DatasetManifest& manifest);

struct SyntheticOptions {
    std::size_t count = 8;
    std::size_t image_size = 112;
    std::uint64_t seed = 0;
    double margin = 0.0;  // polyps keep this fraction of the side (at most 0.25) away from every border
};

/// Writes images with a textured background, 1-3 filled ellipses (labeled, masked) and
/// unlabeled distractor strokes.
DatasetManifest generate_synthetic(const std::filesystem::path& out_dir, const SyntheticOptions& options);

struct Component {
    std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive pixel extents
    std::vector<std::size_t> pixels;             // sorted raster indices
};

/// 8-connected components of pixels >= 128, in raster order of their first pixel.
/// Components smaller than `min_pixels` are discarded.
std::vector<Component> connected_components(const GrayImage& mask, std::size_t min_pixels = 10);

BBox component_box(const Component& component, std::size_t width, std::size_t height);

/// Converts masks under <root>/masks into label files under <root>/labels.
/// Images without a mask are skipped and reported in `warnings`.
DatasetManifest import_etis(const std::filesystem::path& root, std::vector<std::string>* warnings = nullptr);

/// Stable 64-bit FNV-1a, for seeds derived from names.
std::uint64_t stable_hash(std::string_view text, std::uint64_t seed = 0);

}  // namespace gdk
