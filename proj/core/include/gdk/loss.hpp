#pragma once

#include <span>
#include <vector>

#include "gdk/box.hpp"
#include "gdk/network.hpp"
#include "gdk/tape.hpp"

namespace gdk {

struct LossWeights {
    double box = 5.0;
    double giou = 1.0;
    double object = 1.0;
    double no_object = 0.5;
    double cls = 1.0;
};

/// Components of the detection loss, each already averaged over the batch.
/// total = box*box_mse + giou*giou_term + confidence_term + cls*class_term, where
/// confidence_term already carries the object / no-object weights.
struct LossBreakdown {
    double total = 0.0;
    double box_mse = 0.0;
    double giou_term = 0.0;
    double confidence_term = 0.0;
    double class_term = 0.0;
};

/// -(1/N) sum_i ln p_i(label_i) over rows of probabilities [N, C]; probabilities clamped at 1e-12.
double cross_entropy(const Tensor64& probabilities, std::span<const int> labels);

/// Loss of one decoded grid against image-normalized targets.
///
/// Each target goes to the cell holding its center and claims the not-yet-claimed box in that
/// cell with the highest IoU. box_mse and giou_term average the (x, y, sqrt w, sqrt h) squared
/// error and 1 - GIoU over claimed boxes. confidence_term sums (C_s - IoU)^2 over claimed boxes
/// and C_s^2 over all others, each with its weight. The class term is the cross-entropy over
/// cells holding a target.
LossBreakdown detection_loss(const GridPrediction& prediction, std::span<const BBox> targets,
                             const LossWeights& weights);

template <typename T>
struct HeadLoss {
    LossBreakdown breakdown;
    BasicTensor<T> grad;  // d total / d raw head values, same shape as the input
};

/// Batch loss over raw head values [N, S*S*(B*5 + classes)], averaged over images,
/// with the exact gradient w.r.t. every raw value.
template <typename T>
HeadLoss<T> detection_loss_raw(const BasicTensor<T>& raw_head, const std::vector<std::vector<BBox>>& targets,
                               const NetworkConfig& config, const LossWeights& weights);

/// Tape op wrapping detection_loss_raw. Returns a scalar; writes the breakdown if requested.
template <typename T>
Var detection_loss(Tape<T>& tape, Var raw_head, const std::vector<std::vector<BBox>>& targets,
                   const NetworkConfig& config, const LossWeights& weights, LossBreakdown* breakdown = nullptr);

}  // namespace gdk
