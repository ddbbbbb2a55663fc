#include <gtest/gtest.h>

#include "gdk/error.hpp"
#include "gdk/tensor.hpp"

using namespace gdk;

TEST(Tensor, ShapeAndFill) {
    Tensor t({2, 3}, 1.5f);
    EXPECT_EQ(t.size(), 6u);
    EXPECT_EQ(t.rank(), 2u);
    EXPECT_EQ(t.dim(1), 3u);
    EXPECT_FLOAT_EQ(t.at({1, 2}), 1.5f);
    EXPECT_EQ(shape_string(t.shape()), "[2,3]");
}

TEST(Tensor, RowMajorOffsets) {
    Tensor64 t({2, 3, 4});
    EXPECT_EQ(t.offset({1, 2, 3}), 1u * 12 + 2u * 4 + 3u);
    EXPECT_THROW((void)t.offset({2, 0, 0}), UsageError);
    EXPECT_THROW((void)t.offset({0, 0}), UsageError);
}

TEST(Tensor, RejectsInconsistentData) {
    EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), UsageError);
    EXPECT_THROW(Tensor({2, 0}), UsageError);
}

TEST(Tensor, ReshapeKeepsData) {
    Tensor64 t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    const Tensor64 r = t.reshaped({3, 2});
    EXPECT_EQ(r.at({2, 1}), 6.0);
    EXPECT_THROW((void)t.reshaped({4, 2}), UsageError);
}

TEST(Tensor, FiniteCheckAndCast) {
    Tensor64 t({3}, std::vector<double>{1.0, 2.0, 3.0});
    EXPECT_TRUE(t.all_finite());
    t[1] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(t.all_finite());
    const Tensor f = Tensor64({2}, std::vector<double>{0.5, -2.0}).cast<float>();
    EXPECT_EQ(f[0], 0.5f);
    EXPECT_EQ(f[1], -2.0f);
}
