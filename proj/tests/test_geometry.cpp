#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "igtrack/errors.hpp"
#include "igtrack/geometry.hpp"
#include "oracles.hpp"

namespace igtrack {
namespace {

using testing::as_box;
using testing::as_vec;
using testing::central_diff;
using testing::raster_iou;

Box random_box(std::mt19937_64& gen, double extent = 100) {
    std::uniform_real_distribution<double> pos(0, extent), size(2, 60);
    return {pos(gen), pos(gen), size(gen), size(gen)};
}

TEST(Iou, IdenticalBoxesGiveOne) {
    const Box b{10, 10, 20, 20};
    EXPECT_DOUBLE_EQ(iou(b, b), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero) { EXPECT_EQ(iou({0, 0, 10, 10}, {100, 0, 10, 10}), 0.0); }

TEST(Iou, HalfShiftHandValue) {
    // 10x10 boxes offset by 5 in x: intersection 50, union 150.
    EXPECT_DOUBLE_EQ(iou(Box::from_corners(0, 0, 10, 10), Box::from_corners(5, 0, 15, 10)), 1.0 / 3.0);
}

TEST(Iou, MatchesRasterizationOracle) {
    std::mt19937_64 gen(11);
    for (int i = 0; i < 200; ++i) {
        const Box a = random_box(gen), b = random_box(gen);
        EXPECT_NEAR(iou(a, b), raster_iou(a, b), 1e-3) << i;
    }
}

TEST(Iou, SymmetricTranslationAndScaleInvariant) {
    std::mt19937_64 gen(3);
    for (int i = 0; i < 500; ++i) {
        const Box a = random_box(gen), b = random_box(gen);
        const double v = iou(a, b);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        EXPECT_EQ(v, iou(b, a));
        EXPECT_NEAR(v, iou(a.shifted(13.25, -7.5), b.shifted(13.25, -7.5)), 1e-12);
        const Box as{a.cx * 3, a.cy * 3, a.w * 3, a.h * 3}, bs{b.cx * 3, b.cy * 3, b.w * 3, b.h * 3};
        EXPECT_NEAR(v, iou(as, bs), 1e-12);
    }
}

TEST(Iou, RejectsInvalidBoxes) {
    EXPECT_THROW(iou({0, 0, 0, 1}, {0, 0, 1, 1}), PreconditionError);
    EXPECT_THROW(iou({0, 0, 1, -1}, {0, 0, 1, 1}), PreconditionError);
    EXPECT_THROW(iou({std::nan(""), 0, 1, 1}, {0, 0, 1, 1}), PreconditionError);
    EXPECT_THROW(iou({0, 0, 1, 1}, {std::numeric_limits<double>::infinity(), 0, 1, 1}), PreconditionError);
}

TEST(IouGradient, MatchesCentralDifferences) {
    std::mt19937_64 gen(5);
    int checked = 0;
    while (checked < 200) {
        const Box a = random_box(gen, 40), b = random_box(gen, 40);
        if (iou(a, b) < 0.05) continue;
        const BoxGrad g = iou_gradient(a, b);
        const auto fd = central_diff([&](const std::vector<double>& v) { return iou(as_box(v), b); }, as_vec(a), 1e-6);
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(g[static_cast<std::size_t>(k)], fd[static_cast<std::size_t>(k)], 1e-6);
        ++checked;
    }
}

TEST(IouGradient, ZeroWhenDisjointAndAtIdentity) {
    const BoxGrad far = iou_gradient({0, 0, 10, 10}, {50, 50, 10, 10});
    for (double v : far) EXPECT_EQ(v, 0.0);
    const Box b{12.5, -3, 7, 9};
    for (double v : iou_gradient(b, b)) EXPECT_EQ(v, 0.0);
}

TEST(Regression, EncodeDecodeRoundTrip) {
    std::mt19937_64 gen(9);
    for (int i = 0; i < 1000; ++i) {
        const Box anchor = random_box(gen), target = random_box(gen);
        const Box back = decode(anchor, encode(anchor, target));
        EXPECT_NEAR(back.cx, target.cx, 1e-9);
        EXPECT_NEAR(back.cy, target.cy, 1e-9);
        EXPECT_NEAR(back.w, target.w, 1e-9);
        EXPECT_NEAR(back.h, target.h, 1e-9);
    }
}

TEST(Regression, HandValues) {
    const Box anchor{100, 100, 64, 32};
    const RegressionDelta d = encode(anchor, {116, 92, 128, 32});
    EXPECT_DOUBLE_EQ(d.dx, 0.25);
    EXPECT_DOUBLE_EQ(d.dy, -0.25);
    EXPECT_DOUBLE_EQ(d.dw, std::log(2.0));
    EXPECT_DOUBLE_EQ(d.dh, 0.0);
    EXPECT_EQ(decode(anchor, {}), anchor);
}

TEST(Regression, DecodeClampsLargeSizeDeltas) {
    bool clamped = false;
    const Box anchor{0, 0, 10, 10};
    const Box b = decode(anchor, {0, 0, 50, -50}, &clamped);
    EXPECT_TRUE(clamped);
    EXPECT_DOUBLE_EQ(b.w, 10 * std::exp(kDeltaClamp));
    EXPECT_DOUBLE_EQ(b.h, 10 * std::exp(-kDeltaClamp));
    decode(anchor, {0, 0, 1, 1}, &clamped);
    EXPECT_FALSE(clamped);
}

TEST(Clip, InsideBoxIsUnchanged) {
    const Box b{50.3, 40.1, 20.7, 10.9};
    EXPECT_EQ(clip_box(b, 100, 100), b);
}

TEST(Clip, ResultLiesInsideFrameWithMinimumSide) {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> pos(-80, 180), size(0.2, 120);
    for (int i = 0; i < 2000; ++i) {
        const Box c = clip_box({pos(gen), pos(gen), size(gen), size(gen)}, 100, 80);
        EXPECT_GE(c.x1(), -1e-12);
        EXPECT_GE(c.y1(), -1e-12);
        EXPECT_LE(c.x2(), 100 + 1e-12);
        EXPECT_LE(c.y2(), 80 + 1e-12);
        EXPECT_GE(c.w, 1.0 - 1e-12);
        EXPECT_GE(c.h, 1.0 - 1e-12);
    }
}

TEST(Clip, OutsideBoxCollapsesAndIsFlagged) {
    bool degenerate = false;
    const Box c = clip_box({-50, 30, 10, 10}, 100, 100, &degenerate);
    EXPECT_TRUE(degenerate);
    EXPECT_DOUBLE_EQ(c.w, 1.0);
    EXPECT_DOUBLE_EQ(c.x1(), 0.0);
}

TEST(Clip, JacobianMatchesCentralDifferences) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> pos(-20, 120), size(5, 80);
    for (int i = 0; i < 300; ++i) {
        const Box b{pos(gen), pos(gen), size(gen), size(gen)};
        const ClipResult r = clip_box_with_jacobian(b, 100, 100);
        if (r.degenerate) continue;
        for (int out = 0; out < 4; ++out) {
            const auto fd = central_diff(
                [&](const std::vector<double>& v) {
                    return as_vec(clip_box(as_box(v), 100, 100))[static_cast<std::size_t>(out)];
                },
                as_vec(b), 1e-7);
            for (int in = 0; in < 4; ++in) {
                EXPECT_NEAR(r.jacobian[static_cast<std::size_t>(out * 4 + in)], fd[static_cast<std::size_t>(in)], 1e-6)
                    << "box " << i << " d" << out << "/d" << in;
            }
        }
    }
}

TEST(Box, CornerConversionsRoundTrip) {
    const Box b = Box::from_xywh(10, 20, 30, 40);
    EXPECT_EQ(b, (Box{25, 40, 30, 40}));
    const Corners c = b.corners();
    EXPECT_EQ(Box::from_corners(c.x1, c.y1, c.x2, c.y2), b);
}

}  // namespace
}  // namespace igtrack
