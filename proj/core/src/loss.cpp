#include "gdk/loss.hpp"

#include <algorithm>
#include <cmath>

#include "gdk/activations.hpp"
#include "gdk/error.hpp"

namespace gdk {
namespace {

constexpr double kProbabilityFloor = 1e-12;

// Per-box slots in the squashed layout: x, y, sqrt(w), sqrt(h), C_s; then class probabilities.
// Identical indexing to the raw head and GridPrediction.
struct SquashedGrid {
    std::size_t grid = 0;
    std::size_t boxes = 0;
    std::size_t classes = 0;
    std::vector<double> values;

    std::size_t width() const { return boxes * 5 + classes; }
    std::size_t index(std::size_t cell, std::size_t slot) const { return cell * width() + slot; }
};

BBox predicted_box(const SquashedGrid& g, std::size_t cell, std::size_t b) {
    const double S = static_cast<double>(g.grid);
    const std::size_t row = cell / g.grid, col = cell % g.grid;
    const double sw = g.values[g.index(cell, b * 5 + 2)];
    const double sh = g.values[g.index(cell, b * 5 + 3)];
    BBox box;
    box.cx = (static_cast<double>(col) + g.values[g.index(cell, b * 5 + 0)]) / S;
    box.cy = (static_cast<double>(row) + g.values[g.index(cell, b * 5 + 1)]) / S;
    box.w = sw * sw;
    box.h = sh * sh;
    return box;
}

// Adds the gradient of `scale * f(box)` given df/d(cx, cy, w, h) into the squashed slots.
void add_box_gradient(const SquashedGrid& g, std::vector<double>& grad, std::size_t cell, std::size_t b,
                      const std::array<double, 4>& d_box, double scale) {
    const double S = static_cast<double>(g.grid);
    const double sw = g.values[g.index(cell, b * 5 + 2)];
    const double sh = g.values[g.index(cell, b * 5 + 3)];
    grad[g.index(cell, b * 5 + 0)] += scale * d_box[0] / S;
    grad[g.index(cell, b * 5 + 1)] += scale * d_box[1] / S;
    grad[g.index(cell, b * 5 + 2)] += scale * d_box[2] * 2.0 * sw;
    grad[g.index(cell, b * 5 + 3)] += scale * d_box[3] * 2.0 * sh;
}

// Loss of one image in squashed form; gradient w.r.t. squashed values when grad != nullptr.
LossBreakdown squashed_loss(const SquashedGrid& g, std::span<const BBox> targets, const LossWeights& w,
                            std::vector<double>* grad) {
    const std::size_t S = g.grid;
    const std::size_t cells = S * S;
    const double Sd = static_cast<double>(S);

    struct Assignment {
        std::size_t cell;
        std::size_t box;
        const BBox* target;
    };
    std::vector<Assignment> assigned;
    std::vector<bool> claimed(cells * g.boxes, false);
    std::vector<int> cell_class(cells, -1);

    for (const BBox& t : targets) {
        if (!(t.cx >= 0.0 && t.cx <= 1.0 && t.cy >= 0.0 && t.cy <= 1.0))
            throw UsageError("target center outside the unit square");
        if (t.class_id < 0 || static_cast<std::size_t>(t.class_id) >= g.classes)
            throw UsageError("target class " + std::to_string(t.class_id) + " out of range");
        const std::size_t col = std::min(static_cast<std::size_t>(t.cx * Sd), S - 1);
        const std::size_t row = std::min(static_cast<std::size_t>(t.cy * Sd), S - 1);
        const std::size_t cell = row * S + col;
        std::ptrdiff_t best = -1;
        double best_iou = -1.0;
        for (std::size_t b = 0; b < g.boxes; ++b) {
            if (claimed[cell * g.boxes + b]) continue;
            const double v = iou(predicted_box(g, cell, b), t);
            if (v > best_iou) {
                best_iou = v;
                best = static_cast<std::ptrdiff_t>(b);
            }
        }
        if (best < 0) continue;  // every predictor in the cell is already taken
        claimed[cell * g.boxes + static_cast<std::size_t>(best)] = true;
        assigned.push_back(Assignment{cell, static_cast<std::size_t>(best), &t});
        if (cell_class[cell] < 0) cell_class[cell] = t.class_id;
    }

    LossBreakdown out;
    const std::size_t R = assigned.size();
    // Confidence errors are summed over boxes, so the no-object weight trades one object box
    // against the many empty ones.
    double object_sq = 0.0;

    if (R > 0) {
        const double inv_r = 1.0 / static_cast<double>(R);
        for (const Assignment& a : assigned) {
            const std::size_t row = a.cell / S, col = a.cell % S;
            const double target_slots[4] = {a.target->cx * Sd - static_cast<double>(col),
                                            a.target->cy * Sd - static_cast<double>(row),
                                            std::sqrt(a.target->w), std::sqrt(a.target->h)};
            for (std::size_t k = 0; k < 4; ++k) {
                const double diff = g.values[g.index(a.cell, a.box * 5 + k)] - target_slots[k];
                out.box_mse += inv_r * diff * diff;
                if (grad) (*grad)[g.index(a.cell, a.box * 5 + k)] += w.box * inv_r * 2.0 * diff;
            }

            const OverlapWithGradient overlap = overlap_with_gradient(predicted_box(g, a.cell, a.box), *a.target);
            out.giou_term += inv_r * (1.0 - overlap.giou);
            const double conf = g.values[g.index(a.cell, a.box * 5 + 4)];
            const double conf_diff = conf - overlap.iou;
            object_sq += conf_diff * conf_diff;
            if (grad) {
                add_box_gradient(g, *grad, a.cell, a.box, overlap.d_giou, -w.giou * inv_r);
                add_box_gradient(g, *grad, a.cell, a.box, overlap.d_iou, -w.object * 2.0 * conf_diff);
                (*grad)[g.index(a.cell, a.box * 5 + 4)] += w.object * 2.0 * conf_diff;
            }
        }

        std::size_t object_cells = 0;
        for (int c : cell_class) object_cells += c >= 0 ? 1 : 0;
        const double inv_k = 1.0 / static_cast<double>(object_cells);
        for (std::size_t cell = 0; cell < cells; ++cell) {
            if (cell_class[cell] < 0) continue;
            const std::size_t slot = g.index(cell, g.boxes * 5 + static_cast<std::size_t>(cell_class[cell]));
            const double p = g.values[slot];
            if (p > kProbabilityFloor) {
                out.class_term -= inv_k * std::log(p);
                if (grad) (*grad)[slot] += -w.cls * inv_k / p;
            } else {
                out.class_term -= inv_k * std::log(kProbabilityFloor);
            }
        }
    }

    double no_object_sq = 0.0;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        for (std::size_t b = 0; b < g.boxes; ++b) {
            if (claimed[cell * g.boxes + b]) continue;
            const double conf = g.values[g.index(cell, b * 5 + 4)];
            no_object_sq += conf * conf;
            if (grad) (*grad)[g.index(cell, b * 5 + 4)] += w.no_object * 2.0 * conf;
        }
    }

    out.confidence_term = w.object * object_sq + w.no_object * no_object_sq;
    out.total = w.box * out.box_mse + w.giou * out.giou_term + out.confidence_term + w.cls * out.class_term;
    return out;
}

void accumulate(LossBreakdown& into, const LossBreakdown& part, double scale) {
    into.total += scale * part.total;
    into.box_mse += scale * part.box_mse;
    into.giou_term += scale * part.giou_term;
    into.confidence_term += scale * part.confidence_term;
    into.class_term += scale * part.class_term;
}

}  // namespace

double cross_entropy(const Tensor64& probabilities, std::span<const int> labels) {
    if (probabilities.rank() != 2) throw UsageError("cross_entropy expects probabilities [N, C]");
    const std::size_t n = probabilities.dim(0), c = probabilities.dim(1);
    if (labels.size() != n) throw UsageError("cross_entropy needs one label per row");
    if (n == 0) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
            throw UsageError("label " + std::to_string(labels[i]) + " out of range for " + std::to_string(c) +
                             " classes");
        const double p = std::max(probabilities[i * c + static_cast<std::size_t>(labels[i])], kProbabilityFloor);
        total -= std::log(p);
    }
    return total / static_cast<double>(n);
}

LossBreakdown detection_loss(const GridPrediction& prediction, std::span<const BBox> targets,
                             const LossWeights& weights) {
    SquashedGrid g{prediction.grid_size, prediction.boxes_per_cell, prediction.num_classes,
                   std::vector<double>(prediction.values.data().begin(), prediction.values.data().end())};
    for (std::size_t cell = 0; cell < g.grid * g.grid; ++cell) {
        for (std::size_t b = 0; b < g.boxes; ++b) {
            g.values[g.index(cell, b * 5 + 2)] = std::sqrt(std::max(0.0, g.values[g.index(cell, b * 5 + 2)]));
            g.values[g.index(cell, b * 5 + 3)] = std::sqrt(std::max(0.0, g.values[g.index(cell, b * 5 + 3)]));
        }
    }
    return squashed_loss(g, targets, weights, nullptr);
}

template <typename T>
HeadLoss<T> detection_loss_raw(const BasicTensor<T>& raw_head, const std::vector<std::vector<BBox>>& targets,
                               const NetworkConfig& config, const LossWeights& weights) {
    const std::size_t outputs = config.head_outputs();
    if (raw_head.rank() != 2 || raw_head.dim(1) != outputs)
        throw UsageError("detection loss expects raw head [N, " + std::to_string(outputs) + "], got " +
                         shape_string(raw_head.shape()));
    const std::size_t n = raw_head.dim(0);
    if (targets.size() != n) throw UsageError("detection loss needs one target list per image");

    HeadLoss<T> result{LossBreakdown{}, BasicTensor<T>(raw_head.shape())};
    const double inv_n = 1.0 / static_cast<double>(n);
    SquashedGrid g{config.grid_size, config.boxes_per_cell, config.num_classes, std::vector<double>(outputs)};
    std::vector<double> grad(outputs);
    const std::size_t width = g.width();
    const std::size_t B = g.boxes, C = g.classes;

    for (std::size_t img = 0; img < n; ++img) {
        const T* raw = raw_head.data().data() + img * outputs;
        for (std::size_t cell = 0; cell < g.grid * g.grid; ++cell) {
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t k = 0; k < 5; ++k)
                    g.values[cell * width + b * 5 + k] = sigmoid(static_cast<double>(raw[cell * width + b * 5 + k]));
            const std::size_t base = cell * width + B * 5;
            if (C == 1) {
                g.values[base] = sigmoid(static_cast<double>(raw[base]));
            } else {
                double peak = raw[base];
                for (std::size_t c = 1; c < C; ++c) peak = std::max(peak, static_cast<double>(raw[base + c]));
                double total = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    g.values[base + c] = std::exp(static_cast<double>(raw[base + c]) - peak);
                    total += g.values[base + c];
                }
                for (std::size_t c = 0; c < C; ++c) g.values[base + c] /= total;
            }
        }

        std::fill(grad.begin(), grad.end(), 0.0);
        accumulate(result.breakdown, squashed_loss(g, targets[img], weights, &grad), inv_n);

        T* out = result.grad.data().data() + img * outputs;
        for (std::size_t cell = 0; cell < g.grid * g.grid; ++cell) {
            for (std::size_t b = 0; b < B; ++b) {
                for (std::size_t k = 0; k < 5; ++k) {
                    const std::size_t i = cell * width + b * 5 + k;
                    const double s = g.values[i];
                    out[i] = static_cast<T>(inv_n * grad[i] * s * (1.0 - s));
                }
            }
            const std::size_t base = cell * width + B * 5;
            if (C == 1) {
                const double p = g.values[base];
                out[base] = static_cast<T>(inv_n * grad[base] * p * (1.0 - p));
            } else {
                double dot = 0.0;
                for (std::size_t c = 0; c < C; ++c) dot += g.values[base + c] * grad[base + c];
                for (std::size_t c = 0; c < C; ++c)
                    out[base + c] = static_cast<T>(inv_n * g.values[base + c] * (grad[base + c] - dot));
            }
        }
    }
    return result;
}

template <typename T>
Var detection_loss(Tape<T>& tape, Var raw_head, const std::vector<std::vector<BBox>>& targets,
                   const NetworkConfig& config, const LossWeights& weights, LossBreakdown* breakdown) {
    HeadLoss<T> loss = detection_loss_raw(tape.value(raw_head), targets, config, weights);
    if (breakdown) *breakdown = loss.breakdown;
    BasicTensor<T> value({1}, static_cast<T>(loss.breakdown.total));
    return tape.record(std::move(value), {raw_head},
                       [raw_head, grad = std::move(loss.grad)](Tape<T>& t, Var self) {
                           BasicTensor<T> g = grad;
                           const T upstream = t.output_grad(self)[0];
                           for (T& v : g.storage()) v *= upstream;
                           t.accumulate(raw_head, g);
                       });
}

template HeadLoss<float> detection_loss_raw(const Tensor&, const std::vector<std::vector<BBox>>&,
                                            const NetworkConfig&, const LossWeights&);
template HeadLoss<double> detection_loss_raw(const Tensor64&, const std::vector<std::vector<BBox>>&,
                                             const NetworkConfig&, const LossWeights&);
template Var detection_loss(Tape<float>&, Var, const std::vector<std::vector<BBox>>&, const NetworkConfig&,
                            const LossWeights&, LossBreakdown*);
template Var detection_loss(Tape<double>&, Var, const std::vector<std::vector<BBox>>&, const NetworkConfig&,
                            const LossWeights&, LossBreakdown*);

}  // namespace gdk
