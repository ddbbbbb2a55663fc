// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "gdk/augment.hpp"
#include "gdk/box.hpp"
#include "gdk/dataset.hpp"
#include "gdk/evaluation.hpp"
#include "gdk/network_config.hpp"
#include "gdk/sgd.hpp"
#include "gdk/trainer.hpp"
#include "gradient_suites.hpp"
#include "oracles.hpp"

using namespace gdk;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(double v, int digits = 6) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

std::vector<double> metrics_row(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
    std::ostringstream out, err;
    const int code = cli::run({"metrics", "--tp", std::to_string(tp), "--fp", std::to_string(fp), "--fn", std::to_string(fn)},
                              out, err);
    if (code != 0) return {};
    std::string last, line;
    std::istringstream lines(out.str());
    while (std::getline(lines, line))
        if (!line.empty()) last = line;
    std::vector<double> values;
    std::istringstream fields(last);
    for (std::string f; std::getline(fields, f, ',');) values.push_back(std::stod(f));
    return values;  // tp tn fp fn pre sen f1 f2 dice
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

Outcome metrics_arithmetic() {
    Outcome o;
    const auto a = metrics_row(90, 35, 51);
    const auto b = metrics_row(340, 20, 70);
    if (a.size() != 9 || b.size() != 9) {
        o.require(false, "metrics command failed");
        return o;
    }
    const double tol = 0.02;
    o.require(within(a[4], 72.00 - tol, 72.00 + tol), "row1 Pre " + fmt(a[4]));
    o.require(within(a[6], 67.66 - tol, 67.66 + tol), "row1 F1 " + fmt(a[6]));
    o.require(within(a[7], 65.30 - tol, 65.30 + tol), "row1 F2 " + fmt(a[7]));
    o.require(within(a[8], 0.676, 0.677), "row1 Dice " + fmt(a[8]));
    o.require(within(b[4], 94.44 - tol, 94.44 + tol), "row2 Pre " + fmt(b[4]));
    o.require(within(b[5], 82.92 - tol, 82.93 + tol), "row2 Sen " + fmt(b[5]));
    o.require(within(b[6], 88.30 - tol, 88.31 + tol), "row2 F1 " + fmt(b[6]));
    o.require(within(b[7], 85.00 - tol, 85.00 + tol), "row2 F2 " + fmt(b[7]));
    // The reference prints this Dice to two decimals.
    o.require(std::abs(b[8] - 0.88) <= 0.005, "row2 Dice " + fmt(b[8]));
    o.detail = o.pass ? "F1 " + fmt(a[6], 4) + "/" + fmt(b[6], 4) + ", F2 " + fmt(a[7], 4) + "/" + fmt(b[7], 4) +
                            ", Dice " + fmt(a[8], 3) + "/" + fmt(b[8], 3)
                      : o.detail;
    return o;
}

Outcome gradient_oracles() {
    Outcome o;
    std::vector<suites::GradientReport> reports{
        suites::mish_gradients(1000, 11),
        suites::giou_gradients(500, 12),
        suites::conv2d_gradients(100, 13),
        suites::maxpool2d_gradients(100, 14),
        suites::fully_connected_gradients(100, 15),
        suites::softmax_cross_entropy_gradients(100, 16),
        suites::detector_gradients(desk_network_config(), 120, 17),
    };
    std::string summary;
    for (const auto& r : reports) {
        o.require(r.instances >= 100, r.name + " has only " + std::to_string(r.instances) + " instances");
        o.require(r.worst < 1e-4, r.name + " max rel err " + fmt(r.worst, 3));
        summary += (summary.empty() ? "" : ", ") + r.name + " " + fmt(r.worst, 2);
        if (r.refined) summary += " (" + std::to_string(r.refined) + " refined)";
    }
    if (o.pass) o.detail = "max rel err: " + summary;
    return o;
}

Outcome giou_properties() {
    Outcome o;
    const BBox a = BBox::from_corners(0, 0, 2, 2), b = BBox::from_corners(1, 1, 3, 3);
    o.require(std::abs(iou(a, b) - 1.0 / 7.0) <= 1e-9, "worked IoU " + fmt(iou(a, b), 12));
    o.require(std::abs(giou(a, b) - (1.0 / 7.0 - 2.0 / 9.0)) <= 1e-9, "worked GIoU " + fmt(giou(a, b), 12));
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> shift(-5.0, 5.0);
    std::size_t bad = 0;
    for (int i = 0; i < 10000; ++i) {
        const BBox e = oracle::random_box(rng, -1.0, 2.0, 0.01, 1.5), f = oracle::random_box(rng, -1.0, 2.0, 0.01, 1.5);
        const double g = giou(e, f), u = iou(e, f);
        BBox e2 = e, f2 = f;
        const double dx = shift(rng), dy = shift(rng);
        e2.cx += dx;
        f2.cx += dx;
        e2.cy += dy;
        f2.cy += dy;
        const bool ok = g <= u + 1e-15 && g > -1.0 && g <= 1.0 && g == giou(f, e) &&
                        std::abs(giou(e2, f2) - g) <= 1e-6;
        bad += !ok;
    }
    o.require(bad == 0, std::to_string(bad) + " of 10000 pairs violate a property");
    if (o.pass) o.detail = "10000 pairs; worked example IoU 1/7, GIoU 1/7 - 2/9";
    return o;
}

Outcome nms_equivalence() {
    Outcome o;
    std::size_t mismatches = 0, compared = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<int> count(0, 10), cls(0, 1), level(1, 8);
        std::uniform_real_distribution<double> thr(0.1, 0.9);
        std::vector<BBox> boxes;
        for (int i = count(rng); i > 0; --i) {
            BBox bx = oracle::random_box(rng, 0.3, 0.7, 0.1, 0.4);
            bx.confidence = level(rng) / 8.0;
            bx.class_id = cls(rng);
            boxes.push_back(bx);
        }
        const double threshold = seed % 2 ? 0.45 : thr(rng);
        const auto want = oracle::exhaustive_nms(boxes, threshold);
        ++compared;
        if (!want || nms(boxes, threshold) != *want) ++mismatches;
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " of " + std::to_string(compared) + " instances differ");
    if (o.pass) o.detail = "1000 seeded instances of 0-10 boxes agree";
    return o;
}

Outcome augmentation_algebra(const fs::path& work) {
    Outcome o;
    const AugmentRecipe recipe;
    // Polyps stay inside the zoom-in crop, so no variant loses every box.
    generate_synthetic(work / "aug_in", SyntheticOptions{196, 112, 11, recipe.zoom_in / 2});
    const AugmentSummary s = augment_dataset(work / "aug_in", work / "aug_out", recipe, 0);
    std::size_t written = 0;
    for (const auto& entry : fs::directory_iterator(work / "aug_out" / "images")) written += entry.is_regular_file();
    o.require(s.processed == 196, "processed " + std::to_string(s.processed));
    o.require(s.outputs == 2156 && written == 2156, "outputs " + std::to_string(s.outputs) + ", files " + std::to_string(written));

    std::size_t not_identity = 0;
    for (const Sample& sample : load_dataset(work / "aug_in").samples) {
        LabeledImage in{load_image(sample.image), sample.boxes, load_mask(*sample.mask)};
        LabeledImage cur = in;
        for (int k = 0; k < 4; ++k) cur = rotate(cur, 90);
        bool boxes_back = cur.boxes.size() == in.boxes.size();
        for (std::size_t k = 0; boxes_back && k < in.boxes.size(); ++k)
            boxes_back = std::abs(cur.boxes[k].cx - in.boxes[k].cx) <= 1e-12 &&
                         std::abs(cur.boxes[k].cy - in.boxes[k].cy) <= 1e-12 && cur.boxes[k].w == in.boxes[k].w &&
                         cur.boxes[k].h == in.boxes[k].h;
        not_identity += !(cur.image == in.image && cur.mask == in.mask && boxes_back);
    }
    o.require(not_identity == 0, std::to_string(not_identity) + " images not restored by rot90^4");

    using P = std::pair<double, double>;
    std::mt19937_64 rng(41);
    std::size_t box_mismatch = 0, checked = 0;
    auto compare = [&](const std::optional<BBox>& got, const std::optional<BBox>& want) {
        ++checked;
        const bool ok = got.has_value() == want.has_value() &&
                        (!got || (std::abs(got->cx - want->cx) <= 1e-6 && std::abs(got->cy - want->cy) <= 1e-6 &&
                                  std::abs(got->w - want->w) <= 1e-6 && std::abs(got->h - want->h) <= 1e-6));
        box_mismatch += !ok;
    };
    const double zin = 1.0 - recipe.zoom_in, zout = 1.0 / (1.0 - recipe.zoom_out);
    const double fx = recipe.shear_x, fy = recipe.shear_y, mv = recipe.min_visible;
    for (int i = 0; i < 1000; ++i) {
        const BBox b = oracle::random_inside_box(rng);
        compare(rotate_box(b, 90), oracle::map_corners(b, [](double x, double y) { return P{1 - y, x}; }, 0.0));
    }
    for (int i = 0; i < 1000; ++i) {
        const BBox b = oracle::random_inside_box(rng);
        compare(rotate_box(b, 180), oracle::map_corners(b, [](double x, double y) { return P{1 - x, 1 - y}; }, 0.0));
    }
    for (int i = 0; i < 1000; ++i) {
        const BBox b = oracle::random_inside_box(rng);
        compare(rotate_box(b, 270), oracle::map_corners(b, [](double x, double y) { return P{y, 1 - x}; }, 0.0));
    }
    for (int i = 0; i < 1000; ++i) {
        const BBox b = oracle::random_inside_box(rng);
        compare(zoom_box(b, recipe.zoom_in, ZoomDirection::In, mv),
                oracle::map_corners(b, [&](double x, double y) { return P{0.5 + (x - 0.5) / zin, 0.5 + (y - 0.5) / zin}; }, mv));
    }
    for (int i = 0; i < 1000; ++i) {
        const BBox b = oracle::random_inside_box(rng);
        compare(zoom_box(b, recipe.zoom_out, ZoomDirection::Out, mv),
                oracle::map_corners(b, [&](double x, double y) { return P{0.5 + (x - 0.5) / zout, 0.5 + (y - 0.5) / zout}; }, mv));
    }
    for (int i = 0; i < 1000; ++i) {
        const BBox b = oracle::random_inside_box(rng);
        compare(shear_box(b, ShearAxis::X, fx, mv),
                oracle::map_corners(b, [&](double x, double y) { return P{x + fx * (y - 0.5), y}; }, mv));
    }
    for (int i = 0; i < 1000; ++i) {
        const BBox b = oracle::random_inside_box(rng);
        compare(shear_box(b, ShearAxis::Y, fy, mv),
                oracle::map_corners(b, [&](double x, double y) { return P{x, y + fy * (x - 0.5)}; }, mv));
    }
    o.require(box_mismatch == 0, std::to_string(box_mismatch) + " of " + std::to_string(checked) + " boxes off the corner oracle");
    if (o.pass)
        o.detail = "196 inputs -> " + std::to_string(s.outputs) + " outputs; rot90^4 identity on 196 images; " +
                   std::to_string(checked) + " boxes match the corner oracle";
    return o;
}

struct OverfitRun {
    TrainResult result;
    ConfusionCounts counts;
};

OverfitRun overfit(const fs::path& data, const fs::path& out) {
    const DatasetManifest manifest = load_dataset(data);
    const RunConfig run = load_run_config(GDK_SOURCE_DIR "/configs/desk.run");
    OverfitRun r;
    r.result = train(desk_network_config(), manifest.samples, run, TrainOptions{out, false, {}});
    const Network<float> net = load_network(desk_network_config(), r.result.final_checkpoint);
    r.counts = evaluate<float>(net, manifest.samples, EvaluationOptions{0.5, 0.45});
    return r;
}

Outcome overfit_sanity(const OverfitRun& r) {
    Outcome o;
    const auto& h = r.result.history;
    if (h.size() < 10) {
        o.require(false, "fewer than 10 iterations");
        return o;
    }
    const double first = h[9].total, last = h.back().total, ratio = last / first;
    o.require(h.size() <= 2000, std::to_string(h.size()) + " iterations");
    o.require(ratio <= 0.01, "final/iteration-10 loss " + fmt(ratio, 4));
    const auto pre = precision(r.counts), sen = sensitivity(r.counts);
    o.require(pre && *pre == 100.0, "Pre " + format_metric(pre, 2));
    o.require(sen && *sen == 100.0, "Sen " + format_metric(sen, 2));
    const std::string summary = std::to_string(h.size()) + " iterations, loss " + fmt(first, 5) + " -> " + fmt(last, 5) +
                                " (" + fmt(100 * ratio, 3) + "%), TP " + std::to_string(r.counts.tp) + " FP " +
                                std::to_string(r.counts.fp) + " FN " + std::to_string(r.counts.fn) + ", Pre " +
                                format_metric(pre, 2) + " Sen " + format_metric(sen, 2);
    o.detail = o.pass ? summary : o.detail + " [" + summary + "]";
    return o;
}

Outcome determinism(const fs::path& a, const fs::path& b) {
    Outcome o;
    for (const char* name : {"final.gdk", "best.gdk", "metrics.csv"})
        o.require(oracle::same_file_bytes(a / name, b / name), std::string(name) + " differs");
    if (o.pass) o.detail = "final.gdk, best.gdk and metrics.csv bit-identical across two runs";
    return o;
}

Outcome schedule_checks() {
    Outcome o;
    o.require(lr_multiplier(0.95, 53, 32, 1724) == 1.0, "t=53 multiplier " + fmt(lr_multiplier(0.95, 53, 32, 1724)));
    o.require(lr_multiplier(0.95, 54, 32, 1724) == 0.95, "t=54 multiplier " + fmt(lr_multiplier(0.95, 54, 32, 1724)));

    const double eta = 0.05, mu = 0.9, gamma = 0.5;
    const std::vector<double> w0{0.4, -1.3, 2.2}, g1{0.7, -0.2, 1.9}, g2{-0.6, 0.8, 0.05};
    std::vector<Tensor64> w{Tensor64({3}, w0)};
    // Dataset of 2 with batch 2: the second step is already in epoch 1.
    auto state = SgdState<double>::create(SgdOptions{eta, mu, gamma, 2, 2}, w);
    sgd_step<double>(state, w, std::vector<Tensor64>{Tensor64({3}, g1)});
    sgd_step<double>(state, w, std::vector<Tensor64>{Tensor64({3}, g2)});
    double worst = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double v1 = -eta * g1[i];
        const double v2 = mu * v1 - gamma * eta * g2[i];
        worst = std::max({worst, std::abs(w[0][i] - (w0[i] + v1 + v2)), std::abs(state.velocities[0][i] - v2)});
    }
    o.require(worst <= 1e-12, "two-step error " + fmt(worst, 3));
    if (o.pass) o.detail = "multiplier 1 at t=53, 0.95 at t=54; two-step error " + fmt(worst, 3);
    return o;
}

}  // namespace

int main() {
    oracle::TempDir work("acceptance");
    int failures = 0;
    auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !o.pass;
        std::printf("%s  %d  %-28s %s  [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    };

    report(1, "metrics arithmetic", metrics_arithmetic);
    report(2, "gradient oracles", gradient_oracles);
    report(3, "giou properties", giou_properties);
    report(4, "nms oracle equivalence", nms_equivalence);
    report(5, "augmentation count/algebra", [&] { return augmentation_algebra(work.path()); });

    OverfitRun first, second;
    bool trained = false;
    report(6, "desk overfit sanity", [&] {
        generate_synthetic(work / "overfit", SyntheticOptions{8, 112, 7});
        first = overfit(work / "overfit", work / "run_a");
        trained = true;
        return overfit_sanity(first);
    });
    report(7, "determinism", [&] {
        if (!trained) return Outcome{false, "criterion 6 run did not complete"};
        second = overfit(work / "overfit", work / "run_b");
        return determinism(work / "run_a", work / "run_b");
    });
    report(8, "lr schedule and sgd step", schedule_checks);

    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
