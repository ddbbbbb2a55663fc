#include "gdk/box.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gdk/error.hpp"

namespace gdk {
namespace {

// Gradients below are w.r.t. e's corners in the order (x1, x2, y1, y2).
using CornerGrad = std::array<double, 4>;

std::array<double, 4> corners_to_center(const CornerGrad& g) {
    return {g[0] + g[1], g[2] + g[3], 0.5 * (g[1] - g[0]), 0.5 * (g[3] - g[2])};
}

// Both boxes have zero area: -1 unless they coincide.
double degenerate_giou(const BBox& e, const BBox& f) { return e.cx == f.cx && e.cy == f.cy ? 0.0 : -1.0; }

}  // namespace

BBox BBox::from_corners(double x1, double y1, double x2, double y2, double confidence, int class_id) {
    return BBox{0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1, confidence, class_id};
}

bool is_valid(const BBox& box) {
    return std::isfinite(box.cx) && std::isfinite(box.cy) && std::isfinite(box.w) && std::isfinite(box.h) &&
           box.w >= 0.0 && box.h >= 0.0;
}

OverlapWithGradient overlap_with_gradient(const BBox& e, const BBox& f) {
    const double ex1 = e.x1(), ex2 = e.x2(), ey1 = e.y1(), ey2 = e.y2();
    const double fx1 = f.x1(), fx2 = f.x2(), fy1 = f.y1(), fy2 = f.y2();

    // Intersection. Touching edges (extent exactly 0) stay in the overlapping regime.
    const double ix1 = std::max(ex1, fx1), ix2 = std::min(ex2, fx2);
    const double iy1 = std::max(ey1, fy1), iy2 = std::min(ey2, fy2);
    const bool overlap_x = ix2 >= ix1;
    const bool overlap_y = iy2 >= iy1;
    const double iw = overlap_x ? ix2 - ix1 : 0.0;
    const double ih = overlap_y ? iy2 - iy1 : 0.0;
    const double inter = iw * ih;

    CornerGrad d_iw{}, d_ih{};
    if (overlap_x) {
        d_iw[0] = ex1 >= fx1 ? -1.0 : 0.0;
        d_iw[1] = ex2 <= fx2 ? 1.0 : 0.0;
    }
    if (overlap_y) {
        d_ih[2] = ey1 >= fy1 ? -1.0 : 0.0;
        d_ih[3] = ey2 <= fy2 ? 1.0 : 0.0;
    }
    CornerGrad d_inter{};
    for (int i = 0; i < 4; ++i) d_inter[i] = ih * d_iw[i] + iw * d_ih[i];

    const double ew = ex2 - ex1, eh = ey2 - ey1;
    const double area_e = ew * eh;
    const double area_f = (fx2 - fx1) * (fy2 - fy1);
    const CornerGrad d_area_e{-eh, eh, -ew, ew};

    const double uni = area_e + area_f - inter;
    CornerGrad d_uni{};
    for (int i = 0; i < 4; ++i) d_uni[i] = d_area_e[i] - d_inter[i];

    // Enclosing box.
    const double cx1 = std::min(ex1, fx1), cx2 = std::max(ex2, fx2);
    const double cy1 = std::min(ey1, fy1), cy2 = std::max(ey2, fy2);
    const double cw = cx2 - cx1, ch = cy2 - cy1;
    const double enclosing = cw * ch;
    const CornerGrad d_cw{ex1 <= fx1 ? -1.0 : 0.0, ex2 >= fx2 ? 1.0 : 0.0, 0.0, 0.0};
    const CornerGrad d_ch{0.0, 0.0, ey1 <= fy1 ? -1.0 : 0.0, ey2 >= fy2 ? 1.0 : 0.0};
    CornerGrad d_enclosing{};
    for (int i = 0; i < 4; ++i) d_enclosing[i] = ch * d_cw[i] + cw * d_ch[i];

    OverlapWithGradient out;
    CornerGrad d_iou{}, d_giou{};
    if (uni > 0.0) {
        out.iou = inter / uni;
        for (int i = 0; i < 4; ++i) d_iou[i] = (d_inter[i] * uni - inter * d_uni[i]) / (uni * uni);
    }
    if (enclosing > 0.0) {
        out.giou = out.iou - (enclosing - uni) / enclosing;
        for (int i = 0; i < 4; ++i)
            d_giou[i] = d_iou[i] + (d_uni[i] * enclosing - uni * d_enclosing[i]) / (enclosing * enclosing);
        if (uni <= 0.0) d_giou = {};
    } else {
        out.giou = uni > 0.0 ? out.iou : degenerate_giou(e, f);
    }
    out.d_iou = corners_to_center(d_iou);
    out.d_giou = corners_to_center(d_giou);
    return out;
}

double iou(const BBox& e, const BBox& f) {
    const double iw = std::min(e.x2(), f.x2()) - std::max(e.x1(), f.x1());
    const double ih = std::min(e.y2(), f.y2()) - std::max(e.y1(), f.y1());
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = e.area() + f.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const BBox& e, const BBox& f) {
    const double iw = std::max(0.0, std::min(e.x2(), f.x2()) - std::max(e.x1(), f.x1()));
    const double ih = std::max(0.0, std::min(e.y2(), f.y2()) - std::max(e.y1(), f.y1()));
    const double inter = iw * ih;
    const double uni = e.area() + f.area() - inter;
    const double value = uni > 0.0 ? inter / uni : 0.0;
    const double enclosing = (std::max(e.x2(), f.x2()) - std::min(e.x1(), f.x1())) *
                             (std::max(e.y2(), f.y2()) - std::min(e.y1(), f.y1()));
    if (uni <= 0.0) return degenerate_giou(e, f);
    if (enclosing <= 0.0) return value;
    return value - (enclosing - uni) / enclosing;
}

GiouLoss giou_loss(const BBox& prediction, const BBox& truth) {
    const OverlapWithGradient o = overlap_with_gradient(prediction, truth);
    GiouLoss result;
    result.loss = 1.0 - o.giou;
    for (int i = 0; i < 4; ++i) result.grad[i] = -o.d_giou[i];
    return result;
}

std::vector<BBox> nms(std::span<const BBox> boxes, double iou_threshold) {
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
        throw UsageError("nms threshold must lie in (0, 1)");
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return boxes[a].confidence > boxes[b].confidence;
    });

    std::vector<bool> suppressed(boxes.size(), false);
    std::vector<BBox> kept;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (suppressed[i]) continue;
        const BBox& keep = boxes[order[i]];
        kept.push_back(keep);
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            if (suppressed[j]) continue;
            const BBox& other = boxes[order[j]];
            if (other.class_id == keep.class_id && iou(keep, other) > iou_threshold) suppressed[j] = true;
        }
    }
    return kept;
}

}  // namespace gdk
