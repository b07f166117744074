#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "igtrack/errors.hpp"
#include "igtrack/synthetic.hpp"
#include "igtrack/tracker.hpp"

namespace igtrack {
namespace {

class TrackerTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        model_ = new Model(Model::from_params(init_params<float>(NetConfig::standard(), 3)));
        SyntheticConfig c;
        c.n_sequences = 2;
        c.n_frames = 8;
        c.seed = 21;
        c.scale_drift = 1.01;
        data_ = new Dataset(gen_synthetic(c));
    }
    static void TearDownTestSuite() {
        delete model_;
        delete data_;
    }
    static const Model& model() { return *model_; }
    static const SequenceRecord& seq(std::size_t i = 0) { return (*data_)[i]; }

    static Model* model_;
    static Dataset* data_;
};

Model* TrackerTest::model_ = nullptr;
Dataset* TrackerTest::data_ = nullptr;

TEST(Hanning, MatchesCosineFormula) {
    const std::vector<double> w = hanning_window(5);
    const double h[5] = {0, 0.5, 1, 0.5, 0};
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) EXPECT_NEAR(w[static_cast<std::size_t>(i * 5 + j)], h[i] * h[j], 1e-15);
    }
    const std::vector<double> w17 = hanning_window(17);
    EXPECT_EQ(w17[8 * 17 + 8], 1.0);
    EXPECT_NEAR(w17[3 * 17 + 8], 0.5 - 0.5 * std::cos(2 * std::numbers::pi * 3 / 16), 1e-15);
    EXPECT_EQ(hanning_window(1), std::vector<double>{1.0});
}

TEST(Nms, SuppressesOverlapsBestFirst) {
    const std::vector<Box> boxes{{10, 10, 10, 10}, {11, 10, 10, 10}, {40, 40, 10, 10}, {10.5, 10, 10, 10}};
    const std::vector<double> scores{0.5, 0.9, 0.7, 0.8};
    EXPECT_EQ(nms(boxes, scores, 0.7), (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(nms(boxes, scores, 1.0), (std::vector<std::size_t>{1, 3, 2, 0}));
    EXPECT_TRUE(nms({}, {}, 0.7).empty());
}

TEST(Mode, ParseAndDefaults) {
    EXPECT_EQ(parse_tracker_mode("base"), TrackerMode::kBase);
    EXPECT_EQ(parse_tracker_mode("ig"), TrackerMode::kIg);
    EXPECT_THROW(parse_tracker_mode("fast"), ConfigError);
    const TrackerConfig base = TrackerConfig::defaults(TrackerMode::kBase);
    EXPECT_TRUE(base.penalties);
    EXPECT_EQ(base.penalty_k, 0.055);
    EXPECT_EQ(base.window_influence, 0.42);
    EXPECT_FALSE(base.nms);
    const TrackerConfig ig = TrackerConfig::defaults(TrackerMode::kIg);
    EXPECT_FALSE(ig.penalties);
    EXPECT_EQ(ig.window_influence, 0.0);
}

TEST_F(TrackerTest, InitCachesTemplateFeatures) {
    const TrackerConfig cfg = TrackerConfig::defaults(TrackerMode::kIg);
    const TrackerState s = track_init(model(), seq().frames[0], seq().gt[0], cfg);
    EXPECT_EQ(s.current_box, seq().gt[0]);
    EXPECT_EQ(s.vx, 0.0);
    EXPECT_EQ(s.vy, 0.0);
    const Patch z = crop_template(seq().frames[0], seq().gt[0]);
    EXPECT_EQ(s.template_features, embed_template(model().params, model().net, z.data));
    const TrackerState again = track_init(model(), seq().frames[0], seq().gt[0], cfg);
    EXPECT_EQ(again.template_features, s.template_features);
    EXPECT_EQ(again.current_box, s.current_box);
}

TEST_F(TrackerTest, InvalidUseRejected) {
    Tracker t(model(), TrackerConfig::defaults(TrackerMode::kBase));
    EXPECT_THROW(t.update(seq().frames[1]), UsageError);
    EXPECT_THROW(t.init(seq().frames[0], {10, 10, 0, 5}), PreconditionError);
}

TEST_F(TrackerTest, SequenceOutputShapeAndDeterminism) {
    for (TrackerMode mode : {TrackerMode::kBase, TrackerMode::kIg}) {
        const TrackerConfig cfg = TrackerConfig::defaults(mode);
        const std::vector<Box> a = track_sequence(model(), seq(), cfg);
        const std::vector<Box> b = track_sequence(model(), seq(), cfg);
        ASSERT_EQ(a.size(), seq().size());
        EXPECT_EQ(a.front(), seq().gt.front());
        EXPECT_EQ(a, b);
        const Image& f = seq().frames[0];
        for (const Box& box : a) {
            EXPECT_TRUE(box.valid());
            EXPECT_GE(box.x1(), 0.0);
            EXPECT_GE(box.y1(), 0.0);
            EXPECT_LE(box.x2(), f.width);
            EXPECT_LE(box.y2(), f.height);
        }
    }
}

TEST_F(TrackerTest, VelocityIsCenterDisplacement) {
    TrackerState s = track_init(model(), seq().frames[0], seq().gt[0], TrackerConfig::defaults(TrackerMode::kIg));
    for (std::size_t t = 1; t < seq().size(); ++t) {
        const Box before = s.current_box;
        const Box out = track_frame(model(), s, seq().frames[t]);
        EXPECT_EQ(s.current_box, out);
        EXPECT_EQ(s.vx, out.cx - before.cx);
        EXPECT_EQ(s.vy, out.cy - before.cy);
    }
}

TEST_F(TrackerTest, ExplicitStateMatchesTrackerObject) {
    const TrackerConfig cfg = TrackerConfig::defaults(TrackerMode::kBase);
    TrackerState s = track_init(model(), seq().frames[0], seq().gt[0], cfg);
    std::vector<Box> out{seq().gt[0]};
    for (std::size_t t = 1; t < seq().size(); ++t) out.push_back(track_frame(model(), s, seq().frames[t]));
    EXPECT_EQ(out, track_sequence(model(), seq(), cfg));
}

TEST_F(TrackerTest, AlphaZeroKeepsSize) {
    for (TrackerMode mode : {TrackerMode::kBase, TrackerMode::kIg}) {
        TrackerConfig cfg = TrackerConfig::defaults(mode);
        cfg.alpha = 0;
        const std::vector<Box> out = track_sequence(model(), seq(1), cfg);
        for (const Box& b : out) {
            EXPECT_NEAR(b.w, out[0].w, 1e-9 * out[0].w);
            EXPECT_NEAR(b.h, out[0].h, 1e-9 * out[0].h);
        }
    }
}

TEST_F(TrackerTest, ZeroPenaltyIsBitIdenticalToPenaltiesOff) {
    TrackerConfig off = TrackerConfig::defaults(TrackerMode::kBase);
    off.penalties = false;
    off.window_influence = 0;
    TrackerConfig zero = TrackerConfig::defaults(TrackerMode::kBase);
    zero.penalty_k = 0;
    zero.window_influence = 0;
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(track_sequence(model(), seq(i), off), track_sequence(model(), seq(i), zero));
}

TEST_F(TrackerTest, PenaltyNeutralityAgainstSingleProposalIg) {
    TrackerConfig base = TrackerConfig::defaults(TrackerMode::kBase);
    base.penalties = false;
    base.window_influence = 0;
    TrackerConfig ig = TrackerConfig::defaults(TrackerMode::kIg);
    ig.top_k = 1;
    ig.use_motion = false;
    for (std::size_t i = 0; i < 2; ++i) {
        TrackerState sb = track_init(model(), seq(i).frames[0], seq(i).gt[0], base);
        TrackerState si = track_init(model(), seq(i).frames[0], seq(i).gt[0], ig);
        for (std::size_t t = 1; t < seq(i).size(); ++t) {
            track_frame(model(), sb, seq(i).frames[t]);
            track_frame(model(), si, seq(i).frames[t]);
            EXPECT_EQ(sb.last_anchor, si.last_anchor) << "sequence " << i << " frame " << t;
            // Continue both from the same box so the comparison stays per-frame.
            si.current_box = sb.current_box;
            si.vx = sb.vx;
            si.vy = sb.vy;
        }
    }
}

TEST_F(TrackerTest, ModelLayoutChecked) {
    ParamStore wrong = init_params<float>(NetConfig::reduced(), 1);
    EXPECT_THROW(Model::from_params(wrong), ConfigError);
}

}  // namespace
}  // namespace igtrack
