#include "gdk/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "gdk/error.hpp"

namespace gdk {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
    tp += other.tp;
    tn += other.tn;
    fp += other.fp;
    fn += other.fn;
    return *this;
}

GroundTruthRegion GroundTruthRegion::from_box(const BBox& box) {
    if (!(box.w > 0.0 && box.h > 0.0)) throw UsageError("ground-truth box must have positive extent");
    GroundTruthRegion r;
    r.region_ = box;
    return r;
}

GroundTruthRegion GroundTruthRegion::from_pixels(std::vector<std::size_t> pixels, std::size_t width,
                                                 std::size_t height) {
    if (pixels.empty()) throw UsageError("ground-truth region must be non-empty");
    std::sort(pixels.begin(), pixels.end());
    for (std::size_t p : pixels)
        if (p >= width * height) throw UsageError("ground-truth pixel outside the mask");
    GroundTruthRegion r;
    r.region_ = PixelSet{std::move(pixels), width, height};
    return r;
}

bool GroundTruthRegion::contains(double x, double y) const {
    if (const BBox* b = std::get_if<BBox>(&region_)) return x >= b->x1() && x <= b->x2() && y >= b->y1() && y <= b->y2();
    const PixelSet& set = std::get<PixelSet>(region_);
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) return false;
    const auto px = std::min(static_cast<std::size_t>(x * static_cast<double>(set.width)), set.width - 1);
    const auto py = std::min(static_cast<std::size_t>(y * static_cast<double>(set.height)), set.height - 1);
    return std::binary_search(set.pixels.begin(), set.pixels.end(), py * set.width + px);
}

std::vector<GroundTruthRegion> regions_from_mask(const GrayImage& mask, std::size_t min_pixels) {
    std::vector<GroundTruthRegion> regions;
    for (Component& c : connected_components(mask, min_pixels))
        regions.push_back(GroundTruthRegion::from_pixels(std::move(c.pixels), mask.width, mask.height));
    return regions;
}

std::vector<GroundTruthRegion> regions_from_boxes(std::span<const BBox> boxes) {
    std::vector<GroundTruthRegion> regions;
    for (const BBox& b : boxes) regions.push_back(GroundTruthRegion::from_box(b));
    return regions;
}

ConfusionCounts match_frame(std::span<const BBox> detections, std::span<const GroundTruthRegion> truths) {
    ConfusionCounts c;
    if (truths.empty() && detections.empty()) {
        c.tn = 1;
        return c;
    }
    std::vector<bool> matched(truths.size(), false);
    for (const BBox& d : detections) {
        bool hit = false;
        for (std::size_t t = 0; t < truths.size(); ++t) {
            if (truths[t].contains(d.cx, d.cy)) {
                matched[t] = true;
                hit = true;
            }
        }
        if (!hit) ++c.fp;
    }
    c.tp = static_cast<std::uint64_t>(std::count(matched.begin(), matched.end(), true));
    c.fn = truths.size() - c.tp;
    return c;
}

namespace {
std::optional<double> ratio(std::uint64_t num, std::uint64_t den, double scale) {
    if (den == 0) return std::nullopt;
    return scale * static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

std::optional<double> precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp, 100.0); }
std::optional<double> sensitivity(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn, 100.0); }

std::optional<double> f1_score(const ConfusionCounts& c) {
    const auto p = precision(c), s = sensitivity(c);
    if (!p || !s || *p + *s == 0.0) return std::nullopt;
    return 2.0 * *p * *s / (*p + *s);
}

std::optional<double> f2_score(const ConfusionCounts& c) {
    const auto p = precision(c), s = sensitivity(c);
    if (!p || !s || 4.0 * *p + *s == 0.0) return std::nullopt;
    return 5.0 * *p * *s / (4.0 * *p + *s);
}

std::optional<double> dice(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, 1.0); }

std::string format_metric(const std::optional<double>& value, int decimals) {
    if (!value) return "NA";
    std::ostringstream out;
    out << std::fixed << std::setprecision(decimals) << *value;
    return out.str();
}

std::string metric_csv(const ConfusionCounts& c) {
    std::ostringstream out;
    out << c.tp << ',' << c.tn << ',' << c.fp << ',' << c.fn << ',' << format_metric(precision(c), 2) << ','
        << format_metric(sensitivity(c), 2) << ',' << format_metric(f1_score(c), 2) << ','
        << format_metric(f2_score(c), 2) << ',' << format_metric(dice(c), 3);
    return out.str();
}

std::string metric_report(const ConfusionCounts& c) {
    std::ostringstream out;
    out << "TP   " << c.tp << "\nTN   " << c.tn << "\nFP   " << c.fp << "\nFN   " << c.fn << '\n'
        << "Pre  " << format_metric(precision(c), 2) << '\n'
        << "Sen  " << format_metric(sensitivity(c), 2) << '\n'
        << "F1   " << format_metric(f1_score(c), 2) << '\n'
        << "F2   " << format_metric(f2_score(c), 2) << '\n'
        << "Dice " << format_metric(dice(c), 3) << '\n'
        << metric_csv(c) << '\n';
    return out.str();
}

template <typename T>
ConfusionCounts evaluate(const Network<T>& network, std::span<const Sample> samples, const EvaluationOptions& options) {
    if (samples.empty()) throw UsageError("evaluation set is empty");
    const std::size_t size = network.config().input_size;
    ConfusionCounts total;
    for (const Sample& s : samples) {
        const Image image = resize_bilinear(load_image(s.image), size, size);
        const std::vector<BBox> found = detect(network, image_to_tensor<T>(image), options.conf_threshold,
                                               options.nms_threshold);
        const std::vector<GroundTruthRegion> truths =
            s.mask ? regions_from_mask(load_mask(*s.mask)) : regions_from_boxes(s.boxes);
        total += match_frame(found, truths);
    }
    return total;
}

template ConfusionCounts evaluate<float>(const Network<float>&, std::span<const Sample>, const EvaluationOptions&);
template ConfusionCounts evaluate<double>(const Network<double>&, std::span<const Sample>, const EvaluationOptions&);

}  // namespace gdk
