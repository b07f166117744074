#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "igtrack/errors.hpp"
#include "igtrack/iou_module.hpp"
#include "igtrack/net.hpp"
#include "igtrack/rng.hpp"
#include "oracles.hpp"

namespace igtrack {
namespace {

class IouModule : public ::testing::Test {
protected:
    NetConfig net = NetConfig::reduced();
    AnchorGrid grid = generate_anchors(anchor_spec_for(net), net.search_size);
    std::size_t R = static_cast<std::size_t>(net.response_size());
    BasicTensor<double> cls{{10, R, R}};
    BasicTensor<double> reg{{20, R, R}};

    void randomize(std::uint64_t seed, double cls_scale = 2.0, double reg_scale = 0.3) {
        Rng rng(seed);
        for (double& v : cls.values()) v = rng.uniform(-cls_scale, cls_scale);
        for (double& v : reg.values()) v = rng.uniform(-reg_scale, reg_scale);
    }
    // Anchor a = (ratio r, cell p) lives at channel r, plane offset p.
    double& fg_logit(std::size_t a) { return cls[(2 * (a / (R * R)) + 1) * R * R + a % (R * R)]; }
};

TEST_F(IouModule, SingleDominantLogitGivesItsDecodedBox) {
    const std::size_t a = grid.index(3, 2, 1);
    fg_logit(a) = 10;
    reg[(4 * 3 + 2) * R * R + 2 * R + 1] = 0.2;  // dw of that anchor
    const ProposalSet p = select_topk(cls, reg, grid, 1);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p.source_index[0], a);
    EXPECT_EQ(p.boxes[0], clip_box(decode(grid.boxes[a], {0, 0, 0.2, 0}), 55, 55));
}

TEST_F(IouModule, UniformLogitsTieBreakByLowestIndex) {
    const ProposalSet p = select_topk(cls, reg, grid, 5);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(p.source_index[i], i);
        EXPECT_EQ(p.boxes[i], clip_box(grid.boxes[i], 55, 55));
        EXPECT_DOUBLE_EQ(p.scores[i], 0.5);
    }
}

TEST_F(IouModule, ScoresSortedAndBoxesInsideSearch) {
    randomize(3, 3.0, 2.0);
    const ProposalSet p = select_topk(cls, reg, grid, 20);
    for (std::size_t i = 1; i < p.size(); ++i) EXPECT_GE(p.scores[i - 1], p.scores[i]);
    for (const Box& b : p.boxes) {
        EXPECT_GE(b.x1(), -1e-12);
        EXPECT_LE(b.x2(), 55 + 1e-12);
        EXPECT_GE(b.y1(), -1e-12);
        EXPECT_LE(b.y2(), 55 + 1e-12);
    }
}

TEST_F(IouModule, TooManyProposalsRejected) {
    EXPECT_THROW(select_topk(cls, reg, grid, 126), PreconditionError);
    EXPECT_THROW(select_topk(cls, reg, grid, 0), PreconditionError);
}

TEST(Motion, IdentityInitIsConstantVelocity) {
    const MotionParams identity;
    const Box prev{40, 30, 20, 10};
    EXPECT_EQ(motion_estimate(identity, {prev, 0, 0}), prev);
    EXPECT_EQ(motion_estimate(identity, {prev, 8, 0}), prev.shifted(8, 0));
}

TEST(Motion, CollapsedSizeIsClampedAndFlagged) {
    MotionParams m;
    m.bias[2] = -64.0 / kMotionOutputScale;  // w residual of -64 px
    bool clamped = false;
    const Box b = motion_estimate(m, {{40, 30, 20, 10}, 0, 0}, &clamped);
    EXPECT_TRUE(clamped);
    EXPECT_EQ(b.w, 1.0);
    EXPECT_EQ(b.h, 10.0);
}

TEST(Motion, InvalidStateRejected) {
    EXPECT_THROW(motion_estimate({}, {{0, 0, -1, 1}, 0, 0}), PreconditionError);
    EXPECT_THROW(motion_estimate({}, {{0, 0, 1, 1}, std::nan(""), 0}), PreconditionError);
}

ProposalSet proposals_of(std::vector<Box> boxes) {
    ProposalSet p;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        p.scores.push_back(1.0 - 0.1 * static_cast<double>(i));
        p.source_index.push_back(i);
    }
    p.boxes = std::move(boxes);
    return p;
}

TEST(Response, ElementwiseIou) {
    const Box est{20, 20, 10, 10};
    const ProposalSet p = proposals_of({est, {22, 21, 12, 8}, {80, 80, 5, 5}});
    const IouResponse r = iou_response(est, p);
    ASSERT_EQ(r.values.size(), 3u);
    EXPECT_EQ(r.values[0], 1.0);
    EXPECT_EQ(r.values[1], iou(est, p.boxes[1]));
    EXPECT_EQ(r.values[2], 0.0);
}

TEST(Predict, AlphaOneSingleProposalIsExact) {
    const ProposalSet p = proposals_of({{21.3, 17.9, 11.1, 7.7}});
    const IouResponse r = iou_response({20, 20, 10, 10}, p);
    EXPECT_EQ(predict_box(r, p, {0, 0, 50, 50}, 1.0, false, 10), p.boxes[0]);
    EXPECT_EQ(predict_box(r, p, {0, 0, 50, 50}, 1.0, true, 10), p.boxes[0]);
}

TEST(Predict, AlphaZeroKeepsPreviousSize) {
    const ProposalSet p = proposals_of({{21, 18, 11, 7}, {30, 30, 4, 4}});
    const Box prev{0, 0, 13, 9};
    const Box b = predict_box(iou_response({20, 20, 10, 10}, p), p, prev, 0.0, false, 10);
    EXPECT_EQ(b, (Box{21, 18, 13, 9}));
}

TEST(Predict, EvaluationModeArgmaxWithLowestIndexTie) {
    const Box est{20, 20, 10, 10};
    const ProposalSet p = proposals_of({{50, 50, 4, 4}, est.shifted(2, 0), est.shifted(-2, 0)});
    const Box b = predict_box(iou_response(est, p), p, est, 1.0, false, 10);
    EXPECT_EQ(b, p.boxes[1]);
}

TEST(Predict, SharpSoftSelectionApproachesArgmax) {
    const Box est{20, 20, 10, 10};
    const ProposalSet p = proposals_of({est.shifted(6, 0), est.shifted(1, 1), {26, 14, 14, 8}});
    const IouResponse r = iou_response(est, p);
    const Box hard = predict_box(r, p, est, 0.3, false, 100);
    const Box soft = predict_box(r, p, est, 0.3, true, 100);
    EXPECT_NEAR(soft.cx, hard.cx, 1e-3);
    EXPECT_NEAR(soft.cy, hard.cy, 1e-3);
    EXPECT_NEAR(soft.w, hard.w, 1e-3);
    EXPECT_NEAR(soft.h, hard.h, 1e-3);
}

TEST(Predict, ArgumentsValidated) {
    const ProposalSet p = proposals_of({{20, 20, 10, 10}});
    const IouResponse r = iou_response({20, 20, 10, 10}, p);
    EXPECT_THROW(predict_box(r, p, {20, 20, 10, 10}, 1.5, false, 10), PreconditionError);
    EXPECT_THROW(predict_box(r, p, {20, 20, 10, 10}, 0.5, true, 0), PreconditionError);
    EXPECT_THROW(predict_box({}, ProposalSet{}, {20, 20, 10, 10}, 0.5, false, 10), PreconditionError);
}

TEST(IouLoss, EndpointsAndComplement) {
    const Box a{10, 10, 8, 8};
    EXPECT_EQ(iou_loss(a, a), 0.0);
    EXPECT_EQ(iou_loss(a, a.shifted(100, 0)), 1.0);
    EXPECT_NEAR(iou_loss(a, a.shifted(6, 0)), 6.0 / 7.0, 1e-15);
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> pos(0, 30), size(1, 20);
    for (int i = 0; i < 1000; ++i) {
        const Box p{pos(gen), pos(gen), size(gen), size(gen)}, g{pos(gen), pos(gen), size(gen), size(gen)};
        EXPECT_EQ(iou_loss(p, g) + iou(p, g), 1.0);
    }
}

// Loss as a function of reg and motion parameters, with cls held fixed.
double module_loss(const BasicTensor<double>& cls, const BasicTensor<double>& reg, const AnchorGrid& grid,
                   const MotionParams& m, const MotionState& s, const Box& gt, std::vector<int>* sig) {
    const IouModuleTrace t = iou_module_forward(cls, reg, grid, m, s, gt, IouModuleConfig{});
    if (sig) *sig = t.branch_signature();
    return t.loss;
}

TEST_F(IouModule, BackwardMatchesFiniteDifferences) {
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        randomize(seed);
        Rng rng(seed + 100);
        MotionParams m;
        for (double& v : m.weight) v = rng.uniform(-0.05, 0.05);
        for (double& v : m.bias) v = rng.uniform(-0.05, 0.05);
        const MotionState s{{27.5 + rng.uniform(-3, 3), 27.5 + rng.uniform(-3, 3), 20, 18}, rng.uniform(-2, 2),
                            rng.uniform(-2, 2)};
        const Box gt{27.5 + rng.uniform(-4, 4), 27.5 + rng.uniform(-4, 4), 19, 21};
        const IouModuleTrace t = iou_module_forward(cls, reg, grid, m, s, gt, IouModuleConfig{});
        if (t.loss >= 1.0) continue;
        BasicTensor<double> d_reg(reg.dims());
        MotionParams d_m;
        iou_module_backward(t, grid, 1.0, d_reg, d_m);
        const std::vector<int> sig0 = t.branch_signature();
        const double h = 1e-6;
        auto check = [&](double& x, double analytic, const char* what) {
            const double orig = x;
            std::vector<int> sp, sm;
            x = orig + h;
            const double lp = module_loss(cls, reg, grid, m, s, gt, &sp);
            x = orig - h;
            const double lm = module_loss(cls, reg, grid, m, s, gt, &sm);
            x = orig;
            if (sp != sig0 || sm != sig0) return;
            const double fd = (lp - lm) / (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-5});
            EXPECT_LT(std::abs(fd - analytic) / scale, 1e-4) << what << " seed " << seed;
            ++checked;
        };
        for (std::size_t i : t.proposals.source_index) {
            const std::size_t r = i / (R * R), p = i % (R * R);
            for (std::size_t q = 0; q < 4; ++q) check(reg[(4 * r + q) * R * R + p], d_reg[(4 * r + q) * R * R + p], "reg");
        }
        for (std::size_t i = 0; i < 24; ++i) check(m.weight[i], d_m.weight[i], "motion.weight");
        for (std::size_t i = 0; i < 4; ++i) check(m.bias[i], d_m.bias[i], "motion.bias");
    }
    EXPECT_GT(checked, 500u);
}

TEST_F(IouModule, GradientStepDoesNotIncreaseLoss) {
    int compared = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        randomize(seed + 1000);
        Rng rng(seed);
        const MotionState s{{27.5, 27.5, 20, 18}, rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Box gt{27.5 + rng.uniform(-5, 5), 27.5 + rng.uniform(-5, 5), 18, 22};
        const MotionParams m;
        const IouModuleTrace t = iou_module_forward(cls, reg, grid, m, s, gt, IouModuleConfig{});
        BasicTensor<double> d_reg(reg.dims());
        MotionParams d_m;
        iou_module_backward(t, grid, 1.0, d_reg, d_m);
        BasicTensor<double> stepped = reg;
        for (std::size_t i = 0; i < reg.size(); ++i) stepped[i] -= 1e-4 * d_reg[i];
        const double after = module_loss(cls, stepped, grid, m, s, gt, nullptr);
        EXPECT_LE(after, t.loss + 1e-12) << "seed " << seed;
        ++compared;
    }
    EXPECT_EQ(compared, 100);
}

}  // namespace
}  // namespace igtrack
