#pragma once

// Centroid-based detection counting and the derived percent metrics.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gdk/box.hpp"
#include "gdk/dataset.hpp"
#include "gdk/image.hpp"
#include "gdk/network.hpp"

namespace gdk {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& other);
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// One polyp's ground truth: a set of mask pixels or a normalized box.
class GroundTruthRegion {
public:
    static GroundTruthRegion from_box(const BBox& box);
    /// `pixels` are raster indices into a width x height mask; must be non-empty.
    static GroundTruthRegion from_pixels(std::vector<std::size_t> pixels, std::size_t width, std::size_t height);

    /// Point test on an image-normalized location.
    bool contains(double x, double y) const;

private:
    struct PixelSet {
        std::vector<std::size_t> pixels;  // sorted
        std::size_t width = 0, height = 0;
    };
    std::variant<BBox, PixelSet> region_;
};

/// One region per connected component of the mask.
std::vector<GroundTruthRegion> regions_from_mask(const GrayImage& mask, std::size_t min_pixels = 10);
std::vector<GroundTruthRegion> regions_from_boxes(std::span<const BBox> boxes);

/// A detection whose center lies in a truth matches it; a truth matched by any number of
/// detections counts once. Unmatched detections are FP, unmatched truths FN, and an empty
/// frame with no detections is one TN.
ConfusionCounts match_frame(std::span<const BBox> detections, std::span<const GroundTruthRegion> truths);

/// Percent metrics; nullopt when the denominator is zero.
std::optional<double> precision(const ConfusionCounts& c);
std::optional<double> sensitivity(const ConfusionCounts& c);
std::optional<double> f1_score(const ConfusionCounts& c);
std::optional<double> f2_score(const ConfusionCounts& c);
/// Ratio in [0, 1].
std::optional<double> dice(const ConfusionCounts& c);

/// "NA" for an undefined value, otherwise fixed with the given decimals.
std::string format_metric(const std::optional<double>& value, int decimals);

/// Human-readable table followed by a CSV line "tp,tn,fp,fn,pre,sen,f1,f2,dice".
std::string metric_report(const ConfusionCounts& c);
/// Just the CSV line (no trailing newline).
std::string metric_csv(const ConfusionCounts& c);

struct EvaluationOptions {
    double conf_threshold = 0.25;
    double nms_threshold = 0.45;
};

/// Runs detection on every sample and accumulates match_frame counts. Masks are used as truth
/// when present, boxes otherwise. Throws UsageError on an empty sample list.
template <typename T>
ConfusionCounts evaluate(const Network<T>& network, std::span<const Sample> samples, const EvaluationOptions& options);

}  // namespace gdk
