#pragma once

#include <array>
#include <span>
#include <vector>

namespace gdk {

/// Axis-aligned box in center form with a confidence score and class.
/// Coordinates are image-normalized unless a call site says otherwise.
struct BBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
    double confidence = 1.0;
    int class_id = 0;

    double x1() const { return cx - 0.5 * w; }
    double x2() const { return cx + 0.5 * w; }
    double y1() const { return cy - 0.5 * h; }
    double y2() const { return cy + 0.5 * h; }
    double area() const { return w * h; }

    static BBox from_corners(double x1, double y1, double x2, double y2, double confidence = 1.0,
                             int class_id = 0);

    friend bool operator==(const BBox&, const BBox&) = default;
};

bool is_valid(const BBox& box);

/// |E ∩ F| / |E ∪ F|; 0 for disjoint boxes and for a zero-area union.
double iou(const BBox& e, const BBox& f);

/// IoU - |C \ (E ∪ F)| / |C| with C the smallest enclosing box.
double giou(const BBox& e, const BBox& f);

/// Overlap measures of `e` against fixed `f`, with gradients w.r.t. e's (cx, cy, w, h).
struct OverlapWithGradient {
    double iou = 0.0;
    double giou = 0.0;
    std::array<double, 4> d_iou{};
    std::array<double, 4> d_giou{};
};

OverlapWithGradient overlap_with_gradient(const BBox& e, const BBox& f);

struct GiouLoss {
    double loss = 0.0;
    std::array<double, 4> grad{};  // d loss / d (cx, cy, w, h) of the prediction
};

/// 1 - giou(prediction, truth) and its gradient w.r.t. the prediction.
GiouLoss giou_loss(const BBox& prediction, const BBox& truth);

/// Class-aware greedy suppression. Output sorted by descending confidence;
/// equal confidences keep input order.
std::vector<BBox> nms(std::span<const BBox> boxes, double iou_threshold);

}  // namespace gdk
