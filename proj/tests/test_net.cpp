#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "igtrack/checkpoint.hpp"
#include "igtrack/errors.hpp"
#include "igtrack/iou_module.hpp"
#include "igtrack/net.hpp"
#include "igtrack/optim.hpp"
#include "igtrack/rng.hpp"

namespace igtrack {
namespace {

template <class T>
BasicTensor<T> random_patch(std::size_t size, std::uint64_t seed) {
    Rng rng(seed);
    BasicTensor<T> t({3, size, size});
    for (T& v : t.values()) v = static_cast<T>(rng.uniform());
    return t;
}

NetConfig toy_config() {
    NetConfig c;
    c.template_size = 8;
    c.search_size = 12;
    c.backbone = {{3, 1, 3}, {2, 1, 2}};
    c.head_hidden = 3;
    return c;
}

TEST(Net, StandardShapes) {
    const NetConfig cfg = NetConfig::standard();
    EXPECT_EQ(cfg.template_feature(), 6);
    EXPECT_EQ(cfg.search_feature(), 22);
    EXPECT_EQ(cfg.response_size(), 17);
    EXPECT_EQ(cfg.total_stride(), 8);
    const ParamStore p = init_params<float>(cfg, 1);
    const auto out = forward(p, cfg, random_patch<float>(127, 1), random_patch<float>(255, 2));
    EXPECT_EQ(out.cls.dims(), (std::vector<std::size_t>{10, 17, 17}));
    EXPECT_EQ(out.reg.dims(), (std::vector<std::size_t>{20, 17, 17}));
}

TEST(Net, ReducedShapes) {
    const NetConfig cfg = NetConfig::reduced();
    EXPECT_EQ(cfg.template_feature(), 8);
    EXPECT_EQ(cfg.search_feature(), 12);
    EXPECT_EQ(cfg.response_size(), 5);
    EXPECT_EQ(generate_anchors(anchor_spec_for(cfg), cfg.search_size).size(), 125u);
}

TEST(Net, InvalidConfigRejected) {
    NetConfig c;
    c.backbone = {{200, 1, 4}};
    EXPECT_THROW(c.validate(), ConfigError);
    c = NetConfig{};
    c.anchors_per_cell = 3;
    EXPECT_THROW(anchor_spec_for(c), ConfigError);
}

TEST(Net, ShapeMismatchRejected) {
    const NetConfig cfg = NetConfig::standard();
    const ParamStore p = init_params<float>(cfg, 1);
    EXPECT_THROW(forward(p, cfg, random_patch<float>(100, 1), random_patch<float>(255, 2)), ConfigError);
}

TEST(Net, InitIsDeterministicAndBounded) {
    const NetConfig cfg = NetConfig::standard();
    const ParamStore a = init_params<float>(cfg, 7), b = init_params<float>(cfg, 7);
    EXPECT_EQ(serialize_params(a), serialize_params(b));
    EXPECT_NE(serialize_params(a), serialize_params(init_params<float>(cfg, 8)));
    EXPECT_TRUE(a.all_finite());
    for (const auto& [name, t] : a) {
        if (t.rank() != 4) continue;
        const double limit = init_weight_limit(t.dim(1) * t.dim(2) * t.dim(3));
        for (float v : t.values()) EXPECT_LE(std::abs(v), limit) << name;
    }
}

TEST(Net, MotionBlockStartsAsIdentity) {
    const ParamStore p = init_params<float>(NetConfig::standard(), 3);
    const MotionState s{{100.5, 90.25, 40, 30}, 0, 0};
    EXPECT_EQ(motion_estimate(MotionParams::from_store(p), s), s.prev_box);
}

TEST(Net, MidGrayInputsGiveZeroResponse) {
    const NetConfig cfg = NetConfig::standard();
    const ParamStore p = init_params<float>(cfg, 1);
    BasicTensor<float> z({3, 127, 127}), x({3, 255, 255});
    for (float& v : z.values()) v = 0.5f;
    for (float& v : x.values()) v = 0.5f;
    const auto out = forward(p, cfg, z, x);
    for (float v : out.cls.values()) EXPECT_EQ(v, 0.0f);
    for (float v : out.reg.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Net, ForwardIsDeterministicAndCachingIsTransparent) {
    const NetConfig cfg = NetConfig::standard();
    const ParamStore p = init_params<float>(cfg, 1);
    const auto z = random_patch<float>(127, 1), x = random_patch<float>(255, 2);
    const auto a = forward(p, cfg, z, x), b = forward(p, cfg, z, x);
    EXPECT_EQ(a.cls, b.cls);
    EXPECT_EQ(a.reg, b.reg);
    const auto cached = forward_search(p, cfg, embed_template(p, cfg, z), x);
    EXPECT_EQ(cached.cls, a.cls);
    EXPECT_EQ(cached.reg, a.reg);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    const NetConfig cfg = toy_config();
    const auto p = init_params<double>(cfg, 1);
    auto f = forward(p, cfg, random_patch<double>(8, 1), random_patch<double>(12, 2));
    const auto g = backward(f.tape, BasicTensor<double>(f.cls.dims()), BasicTensor<double>(f.reg.dims()));
    for (const auto& [name, t] : g) {
        for (double v : t.values()) EXPECT_EQ(v, 0.0) << name;
    }
}

TEST(Backward, TapeCannotBeReused) {
    const NetConfig cfg = toy_config();
    const auto p = init_params<double>(cfg, 1);
    auto f = forward(p, cfg, random_patch<double>(8, 1), random_patch<double>(12, 2));
    const BasicTensor<double> dc(f.cls.dims()), dr(f.reg.dims());
    backward(f.tape, dc, dr);
    EXPECT_THROW(backward(f.tape, dc, dr), UsageError);
}

TEST(Backward, OutputBiasGradientCountsPositions) {
    const NetConfig cfg = NetConfig::reduced();
    const auto p = init_params<double>(cfg, 1);
    auto f = forward(p, cfg, random_patch<double>(39, 1), random_patch<double>(55, 2));
    // d(sum of cls) / d(cls bias) = number of positions each bias feeds.
    const auto g = backward(f.tape, BasicTensor<double>(f.cls.dims(), 1.0), BasicTensor<double>(f.reg.dims()));
    for (double v : g.at("head.cls.out.bias").values()) EXPECT_DOUBLE_EQ(v, 25.0);
    for (double v : g.at("head.reg.out.bias").values()) EXPECT_EQ(v, 0.0);
}

// Loss = <c, cls> + <r, reg> with fixed random weights c, r.
TEST(Backward, ToyConfigMatchesFiniteDifferences) {
    const NetConfig cfg = toy_config();
    auto p = init_params<double>(cfg, 5);
    Rng rng(9);
    for (std::size_t i = 0; i < p.size(); ++i) {
        for (double& v : p.entry(i).second.values()) v += rng.uniform(-0.1, 0.1);
    }
    const auto z = random_patch<double>(8, 3), x = random_patch<double>(12, 4);
    auto f = forward(p, cfg, z, x);
    BasicTensor<double> c(f.cls.dims()), r(f.reg.dims());
    for (double& v : c.values()) v = rng.uniform(-1, 1);
    for (double& v : r.values()) v = rng.uniform(-1, 1);
    const auto loss = [&](const BasicParamStore<double>& q, std::vector<bool>* sig) {
        const auto o = forward(q, cfg, z, x);
        if (sig) *sig = o.tape.relu_signature();
        double s = 0;
        for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * o.cls[i];
        for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * o.reg[i];
        return s;
    };
    const std::vector<bool> base_sig = f.tape.relu_signature();
    const auto grads = backward(f.tape, c, r);
    std::size_t checked = 0, skipped = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto& [name, t] = p.entry(i);
        if (name.rfind("motion.", 0) == 0) continue;
        for (std::size_t k = 0; k < t.size(); ++k) {
            const double orig = t[k], h = 1e-3;
            std::vector<bool> sp, sm;
            t[k] = orig + h;
            const double lp = loss(p, &sp);
            t[k] = orig - h;
            const double lm = loss(p, &sm);
            t[k] = orig;
            if (sp != base_sig || sm != base_sig) {
                ++skipped;
                continue;
            }
            const double fd = (lp - lm) / (2 * h), an = grads.at(name)[k];
            const double scale = std::max({std::abs(fd), std::abs(an), 1e-8});
            EXPECT_LT(std::abs(fd - an) / scale, 1e-3) << name << "[" << k << "]";
            ++checked;
        }
    }
    EXPECT_GT(checked, 10 * (skipped + 1));
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const NetConfig cfg = NetConfig::standard();
    const ParamStore p = init_params<float>(cfg, 4);
    const auto path = std::filesystem::temp_directory_path() / "igtrack_test_ckpt.igt";
    save_checkpoint(p, path);
    const ParamStore q = load_checkpoint(path);
    EXPECT_EQ(p, q);
    EXPECT_EQ(serialize_params(q), serialize_params(p));
    const auto z = random_patch<float>(127, 1), x = random_patch<float>(255, 2);
    EXPECT_EQ(forward(p, cfg, z, x).cls, forward(q, cfg, z, x).cls);
    std::filesystem::remove(path);
}

TEST(Checkpoint, LayoutStartsWithMagicAndCount) {
    ParamStore p;
    p.add("a", Tensor({2}, std::vector<float>{1.0f, -2.0f}));
    const auto bytes = serialize_params(p);
    ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 1 + 4 + 4 + 8);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "IGT1");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[8], 1);   // name length
    EXPECT_EQ(bytes[12], 'a');
    EXPECT_EQ(bytes[13], 1);  // ndim
    EXPECT_EQ(bytes[17], 2);  // dim 0
    EXPECT_EQ(bytes[23], 0x80);  // 1.0f little-endian: 00 00 80 3f
    EXPECT_EQ(bytes[24], 0x3f);
    EXPECT_EQ(bytes[28], 0xc0);  // -2.0f: 00 00 00 c0
}

TEST(Checkpoint, CorruptInputRejected) {
    const auto bytes = serialize_params(init_params<float>(NetConfig::reduced(), 1));
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize_params(bad), IoError);
    EXPECT_THROW(deserialize_params({bytes.begin(), bytes.begin() + 20}), IoError);
    auto extra = bytes;
    extra.push_back(0);
    EXPECT_THROW(deserialize_params(extra), IoError);
    EXPECT_THROW(load_checkpoint("/nonexistent/model.igt"), IoError);
}

TEST(Schedule, EndpointsAreExact) {
    EXPECT_EQ(lr_schedule(0), 0.005);
    EXPECT_EQ(lr_schedule(39), 0.00005);
}

TEST(Schedule, GeometricDecay) {
    EXPECT_NEAR(lr_schedule(19) * lr_schedule(20), 0.005 * 0.00005, 1e-18);
    for (int e = 1; e < 40; ++e) {
        EXPECT_LT(lr_schedule(e), lr_schedule(e - 1));
        if (e > 1 && e < 39) EXPECT_NEAR(lr_schedule(e) / lr_schedule(e - 1), lr_schedule(e - 1) / lr_schedule(e - 2), 1e-12);
    }
    EXPECT_THROW(lr_schedule(-1), PreconditionError);
    EXPECT_THROW(lr_schedule(40), PreconditionError);
}

ParamStore tiny_store(float a, float b) {
    ParamStore p;
    p.add("w", Tensor({2}, std::vector<float>{a, b}));
    return p;
}

TEST(Sgd, ZeroLearningRateKeepsParams) {
    const ParamStore p = tiny_store(1.5f, -2.0f);
    EXPECT_EQ(sgd_step(p, tiny_store(3, 4), 0.0, 0.9), p);
}

TEST(Sgd, PlainStepWithoutMomentum) {
    const ParamStore q = sgd_step(tiny_store(1.0f, 2.0f), tiny_store(0.5f, -1.0f), 0.1, 0.0);
    EXPECT_FLOAT_EQ(q.at("w")[0], 1.0f - 0.05f);
    EXPECT_FLOAT_EQ(q.at("w")[1], 2.0f + 0.1f);
}

TEST(Sgd, MomentumAccumulates) {
    SgdMomentum opt(0.9);
    ParamStore p = tiny_store(0, 0);
    opt.step(p, tiny_store(1, 0), 1.0);  // v = 1, p = -1
    opt.step(p, tiny_store(1, 0), 1.0);  // v = 1.9, p = -2.9
    EXPECT_FLOAT_EQ(p.at("w")[0], -2.9f);
    EXPECT_THROW(opt.step(p, ParamStore{}, 1.0), ConfigError);
}

TEST(Sgd, ClipGradNorm) {
    ParamStore g = tiny_store(3, 4);
    EXPECT_DOUBLE_EQ(clip_grad_norm(g, 1.0), 5.0);
    EXPECT_FLOAT_EQ(g.at("w")[0], 0.6f);
    EXPECT_FLOAT_EQ(g.at("w")[1], 0.8f);
    ParamStore small = tiny_store(0.3f, 0.4f);
    clip_grad_norm(small, 1.0);
    EXPECT_EQ(small, tiny_store(0.3f, 0.4f));
}

}  // namespace
}  // namespace igtrack
