#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "gdk/error.hpp"
#include "gdk/evaluation.hpp"
#include "oracles.hpp"

using namespace gdk;

namespace {

BBox at(double cx, double cy, double size = 0.1) { return BBox{cx, cy, size, size}; }

ConfusionCounts match_boxes(const std::vector<BBox>& dets, const std::vector<BBox>& truths) {
    const auto regions = regions_from_boxes(truths);
    return match_frame(dets, regions);
}

}  // namespace

TEST(Metrics, ReferenceRows) {
    const ConfusionCounts a{90, 0, 35, 51};
    EXPECT_NEAR(*precision(a), 72.00, 0.005);
    EXPECT_NEAR(*sensitivity(a), 63.83, 0.005);
    EXPECT_NEAR(*f1_score(a), 67.66, 0.02);
    EXPECT_NEAR(*f2_score(a), 65.30, 0.02);
    EXPECT_NEAR(*dice(a), 0.677, 0.0005);
    const ConfusionCounts b{340, 0, 20, 70};
    EXPECT_NEAR(*precision(b), 94.44, 0.005);
    EXPECT_NEAR(*sensitivity(b), 82.93, 0.005);
    EXPECT_NEAR(*f1_score(b), 88.31, 0.02);
    EXPECT_NEAR(*f2_score(b), 85.00, 0.02);
    EXPECT_NEAR(*dice(b), 0.883, 0.0005);
}

TEST(Metrics, IdentitiesOverRandomCounts) {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::uint64_t> n(0, 500);
    for (int i = 0; i < 1000; ++i) {
        const ConfusionCounts c{n(rng), n(rng), n(rng), n(rng)};
        const auto f1 = f1_score(c), d = dice(c);
        if (c.tp == 0) continue;
        ASSERT_TRUE(f1 && d);
        EXPECT_NEAR(*f1 / 100.0, *d, 1e-9);
        const double p = *precision(c), s = *sensitivity(c);
        EXPECT_LE(std::min(p, s) - 1e-9, *f1);
        EXPECT_GE(std::max(p, s) + 1e-9, *f1);
        EXPECT_NEAR(*f2_score(c), 5 * p * s / (4 * p + s), 1e-9);
    }
}

TEST(Metrics, UndefinedValuesPrintNA) {
    const ConfusionCounts none{0, 3, 0, 0};
    EXPECT_FALSE(precision(none));
    EXPECT_FALSE(sensitivity(none));
    EXPECT_FALSE(f1_score(none));
    EXPECT_FALSE(dice(none));
    EXPECT_EQ(metric_csv(none), "0,3,0,0,NA,NA,NA,NA,NA");
    const ConfusionCounts misses{0, 0, 4, 2};
    EXPECT_EQ(*precision(misses), 0.0);
    EXPECT_FALSE(f1_score(misses));
    EXPECT_EQ(*dice(misses), 0.0);
}

TEST(Metrics, ReportHasTableAndCsv) {
    const std::string r = metric_report(ConfusionCounts{90, 0, 35, 51});
    EXPECT_NE(r.find("Pre  72.00\n"), std::string::npos);
    EXPECT_NE(r.find("Dice 0.677\n"), std::string::npos);
    EXPECT_NE(r.find("90,0,35,51,72.00,63.83,"), std::string::npos);
    EXPECT_EQ(r.back(), '\n');
}

TEST(MatchFrame, WorkedCases) {
    const std::vector<BBox> truths{at(0.3, 0.3, 0.2), at(0.7, 0.7, 0.2)};
    EXPECT_EQ(match_boxes({at(0.3, 0.3)}, truths), (ConfusionCounts{1, 0, 0, 1}));
    EXPECT_EQ(match_boxes({at(0.3, 0.3), at(0.31, 0.29), at(0.7, 0.7)}, truths), (ConfusionCounts{2, 0, 0, 0}));
    EXPECT_EQ(match_boxes({at(0.5, 0.5)}, truths), (ConfusionCounts{0, 0, 1, 2}));
    EXPECT_EQ(match_boxes({}, {}), (ConfusionCounts{0, 1, 0, 0}));
    EXPECT_EQ(match_boxes({at(0.5, 0.5)}, {}), (ConfusionCounts{0, 0, 1, 0}));
    EXPECT_EQ(match_boxes({}, truths), (ConfusionCounts{0, 0, 0, 2}));
}

TEST(MatchFrame, CenterOnBoundaryCounts) {
    EXPECT_EQ(match_boxes({at(0.375, 0.25)}, {at(0.25, 0.25, 0.25)}).tp, 1u);
    EXPECT_EQ(match_boxes({at(0.3751, 0.25)}, {at(0.25, 0.25, 0.25)}).fp, 1u);
}

TEST(MatchFrame, AgreesWithBruteForceAndIsOrderInvariant) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> count(0, 6);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<BBox> truths, dets;
        for (int i = count(rng); i > 0; --i) truths.push_back(oracle::random_box(rng, 0.2, 0.8, 0.05, 0.4));
        for (int i = count(rng); i > 0; --i) dets.push_back(oracle::random_box(rng, 0.1, 0.9, 0.02, 0.2));
        const ConfusionCounts got = match_boxes(dets, truths);
        const oracle::Counts want = oracle::brute_force_match(dets, truths);
        EXPECT_EQ(got, (ConfusionCounts{want.tp, want.tn, want.fp, want.fn}));
        std::shuffle(dets.begin(), dets.end(), rng);
        std::shuffle(truths.begin(), truths.end(), rng);
        EXPECT_EQ(match_boxes(dets, truths), got);
        EXPECT_EQ(got.tp + got.fn, truths.size());
    }
}

TEST(Regions, MaskComponentsAreSeparateTruths) {
    GrayImage mask(20, 10);
    for (std::size_t y = 1; y < 5; ++y)
        for (std::size_t x = 1; x < 5; ++x) mask.at(x, y) = 255;
    for (std::size_t y = 5; y < 9; ++y)
        for (std::size_t x = 12; x < 18; ++x) mask.at(x, y) = 255;
    mask.at(10, 0) = 255;  // single-pixel speck, below the size floor
    const auto regions = regions_from_mask(mask);
    ASSERT_EQ(regions.size(), 2u);
    EXPECT_TRUE(regions[0].contains(0.125, 0.25));
    EXPECT_FALSE(regions[0].contains(0.75, 0.7));
    EXPECT_TRUE(regions[1].contains(0.75, 0.7));
    EXPECT_FALSE(regions[1].contains(1.5, 0.7));
    // A detection on the speck is a false positive.
    const std::vector<BBox> dets{at(0.525, 0.05), at(0.15, 0.25)};
    EXPECT_EQ(match_frame(dets, regions), (ConfusionCounts{1, 0, 1, 1}));
}

TEST(Regions, InvalidInputs) {
    EXPECT_THROW(GroundTruthRegion::from_box(BBox{0.5, 0.5, 0.0, 0.1}), UsageError);
    EXPECT_THROW(GroundTruthRegion::from_pixels({}, 4, 4), UsageError);
    EXPECT_THROW(GroundTruthRegion::from_pixels({16}, 4, 4), UsageError);
}

TEST(Counts, Accumulate) {
    ConfusionCounts a{1, 2, 3, 4};
    a += ConfusionCounts{10, 20, 30, 40};
    EXPECT_EQ(a, (ConfusionCounts{11, 22, 33, 44}));
}
