#include <gtest/gtest.h>

#include <random>

#include "gdk/error.hpp"
#include "gdk/gradcheck.hpp"
#include "gdk/tape.hpp"

using namespace gdk;

TEST(Tape, SumGivesOnes) {
    Tape<double> tape;
    const Var w = tape.parameter(0, Tensor64({2, 3}, 0.7));
    const auto grads = tape.backward(autograd::sum(tape, w));
    ASSERT_EQ(grads.size(), 1u);
    for (double g : grads[0].data()) EXPECT_EQ(g, 1.0);
}

TEST(Tape, HalfSquareGivesValue) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d;
    Tensor64 w({4});
    for (double& v : w.storage()) v = d(rng);
    Tape<double> tape;
    const Var p = tape.parameter(0, w);
    const auto grads = tape.backward(autograd::scale(tape, autograd::sum(tape, autograd::square(tape, p)), 0.5));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(grads[0][i], w[i]);
}

TEST(Tape, UnreachedParameterGetsZeros) {
    Tape<double> tape;
    const Var a = tape.parameter(0, Tensor64({2}, 1.0));
    tape.parameter(1, Tensor64({3}, 5.0));
    const auto grads = tape.backward(autograd::sum(tape, a));
    ASSERT_EQ(grads.size(), 2u);
    EXPECT_EQ(grads[1], Tensor64({3}, 0.0));
}

TEST(Tape, NonScalarLossRejected) {
    Tape<double> tape;
    const Var a = tape.parameter(0, Tensor64({2}, 1.0));
    EXPECT_THROW(tape.backward(autograd::square(tape, a)), UsageError);
}

TEST(Tape, EachOpVisitedOnce) {
    Tape<double> tape;
    const Var a = tape.parameter(0, Tensor64({2}, 1.5));
    const Var b = autograd::square(tape, a);
    const Var c = autograd::multiply(tape, b, a);
    const Var d = autograd::sum(tape, c);
    const auto grads = tape.backward(d);
    EXPECT_EQ(tape.backward_visits(), 3u);
    EXPECT_DOUBLE_EQ(grads[0][0], 3 * 1.5 * 1.5);  // d/da a^3
}

TEST(Tape, ReusedValueAccumulates) {
    Tape<double> tape;
    const Var a = tape.parameter(0, Tensor64({1}, 2.0));
    const Var s = autograd::sum(tape, autograd::multiply(tape, a, a));
    EXPECT_DOUBLE_EQ(tape.backward(s)[0][0], 4.0);
}

TEST(FiniteDifference, SumIsAllOnes) {
    const Tensor64 x({5}, std::vector<double>{1, -2, 3, 0.5, 9});
    const Tensor64 g = finite_difference_gradient(
        [](const Tensor64& t) {
            double s = 0;
            for (double v : t.data()) s += v;
            return s;
        },
        x);
    for (double v : g.data()) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(FiniteDifference, SquareAtThree) {
    const double g = finite_difference_at([](const Tensor64& t) { return t[0] * t[0]; }, Tensor64({1}, 3.0), 0);
    EXPECT_NEAR(g, 6.0, 1e-8);
}

TEST(FiniteDifference, MishSumMatchesAnalytic) {
    Tensor64 x({41});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = -5.0 + 0.25 * static_cast<double>(i);
    const Tensor64 g = finite_difference_gradient(
        [](const Tensor64& t) {
            double s = 0;
            for (double v : t.data()) s += mish(v);
            return s;
        },
        x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LT(relative_error(g[i], mish_grad(x[i])), 1e-6) << x[i];
}

TEST(RelativeError, FloorHandlesZeros) {
    EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
    EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
    EXPECT_NEAR(relative_error(1e-12, 0.0), 1e-4, 1e-15);
}

TEST(Tape, ForwardBackwardDeterministic) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> d;
    Tensor64 x({2, 2, 6, 6}), k({3, 2, 3, 3}), b({3});
    for (auto* t : {&x, &k, &b})
        for (double& v : t->storage()) v = d(rng);
    auto run = [&] {
        Tape<double> tape;
        const Var in = tape.constant(x);
        const Var kk = tape.parameter(0, k), bb = tape.parameter(1, b);
        Var y = autograd::conv2d(tape, in, kk, bb, Conv2dParams{1, 1});
        y = autograd::activation(tape, y, ActivationKind::Mish);
        y = autograd::maxpool2d(tape, y, 2, 2);
        return tape.backward(autograd::sum(tape, autograd::square(tape, y)));
    };
    EXPECT_EQ(run(), run());
}
