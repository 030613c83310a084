#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_images.hpp"
#include "turbrec/image_ops.hpp"
#include "turbrec/matf.hpp"
#include "turbrec/synthetic.hpp"

namespace turbrec {
namespace {

using namespace matf;
using testing::constant_flow;
using testing::random_frame;
using testing::random_plane;

MotionCues zero_cues(int h, int w) { return {Plane(h, w), Plane(h, w), Plane(h, w)}; }

TEST(Cues, StaticSceneGivesZeroCues) {
    const auto f = random_frame(12, 12, 3, 1);
    const FlowField back(12, 12);
    const auto c = motion_cues(FlowField(12, 12), f, f, &back, {});
    for (const auto* p : {&c.motion, &c.photo, &c.fb}) EXPECT_EQ(p->max(), 0.0);
}

TEST(Cues, TranslationWithPerfectWarpIsMotionOnly) {
    const auto prev = testing::analytic_frame(32, 32, 3, testing::smooth_pattern);
    const auto flow = constant_flow(32, 32, 5.0, 0.0);
    const auto warped = warp(prev, flow);
    const auto c = motion_cues(flow, warped, warped, nullptr, {});
    EXPECT_EQ(c.motion.min(), 1.0);
    EXPECT_EQ(c.photo.max(), 0.0);
}

TEST(Cues, ConsistentBackwardFlowHasNoFbError) {
    const auto f = random_frame(16, 16, 3, 2);
    const auto flow = constant_flow(16, 16, 2.0, -1.0);
    const auto back = constant_flow(16, 16, -2.0, 1.0);
    const auto c = motion_cues(flow, f, f, &back, {});
    EXPECT_LT(c.fb.max(), 1e-12);
    const auto c2 = motion_cues(flow, f, f, nullptr, {});
    EXPECT_EQ(c2.fb.max(), 0.0);
}

TEST(Cues, NormalisedToUnitInterval) {
    FlowField flow(20, 20);
    flow.u = random_plane(20, 20, 3, -9.0, 9.0);
    flow.v = random_plane(20, 20, 4, -9.0, 9.0);
    const auto c = motion_cues(flow, random_frame(20, 20, 3, 5), random_frame(20, 20, 3, 6), &flow, {});
    for (const auto* p : {&c.motion, &c.photo, &c.fb}) {
        EXPECT_GE(p->min(), 0.0);
        EXPECT_LE(p->max(), 1.0);
    }
}

TEST(Cues, RejectShapeMismatch) {
    EXPECT_THROW(motion_cues(FlowField(8, 8), Frame(8, 8, 3), Frame(8, 9, 3), nullptr, {}), ShapeError);
    EXPECT_THROW(motion_cues(FlowField(8, 7), Frame(8, 8, 3), Frame(8, 8, 3), nullptr, {}), ShapeError);
}

TEST(EdgeSuppression, ConstantFrameAndZeroStrength) {
    for (double v : testing::values(edge_suppression(Frame(10, 10, 3, 0.3), {}))) EXPECT_EQ(v, 1.0);
    MatfConfig off;
    off.edge_strength = 0.0;
    for (double v : testing::values(edge_suppression(random_frame(10, 10, 3, 7), off))) EXPECT_EQ(v, 1.0);
}

TEST(EdgeSuppression, StepEdgeIsSuppressedOnlyAlongTheEdge) {
    const auto step = testing::analytic_frame(16, 16, 3, [](double x, double, int) { return x < 8 ? 0.1 : 0.9; });
    const auto e = edge_suppression(step, {});
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            if (x == 7 || x == 8) {
                EXPECT_LT(e.at(y, x), 1.0);
            } else {
                EXPECT_EQ(e.at(y, x), 1.0);
            }
        }
}

TEST(MotionMapTest, FloorCeilingAndEmaEndpoint) {
    const MatfConfig cfg;
    const Plane ones(6, 6, 1.0);
    const auto m0 = motion_map(zero_cues(6, 6), ones, cfg);
    for (double v : testing::values(m0.m)) EXPECT_DOUBLE_EQ(v, cfg.m_floor);

    MatfConfig fb = cfg;
    fb.use_fb = true;
    const MotionCues full{ones, ones, ones};
    for (double v : testing::values(motion_map(full, ones, fb).m)) EXPECT_DOUBLE_EQ(v, cfg.m_ceil);
    for (double v : testing::values(motion_map(full, ones, cfg).m)) EXPECT_DOUBLE_EQ(v, cfg.m_ceil);

    MatfConfig no_ema = cfg;
    no_ema.ema_alpha = 1.0;
    const MotionMap prev{random_plane(6, 6, 9)};
    EXPECT_EQ(motion_map(full, ones, no_ema, &prev).m, motion_map(full, ones, no_ema).m);
}

TEST(MotionMapTest, MonotoneInEveryCue) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MatfConfig cfg;
    cfg.use_fb = true;
    for (int trial = 0; trial < 200; ++trial) {
        MotionCues c{random_plane(4, 4, trial), random_plane(4, 4, trial + 1000), random_plane(4, 4, trial + 2000)};
        const Plane edge = random_plane(4, 4, trial + 3000);
        const auto base = motion_map(c, edge, cfg);
        const int which = trial % 3;
        Plane* cue = which == 0 ? &c.motion : which == 1 ? &c.photo : &c.fb;
        for (double& v : cue->data()) v = std::min(1.0, v + u(rng) * 0.5);
        const auto raised = motion_map(c, edge, cfg);
        for (std::size_t i = 0; i < base.m.size(); ++i) EXPECT_GE(raised.m.data()[i], base.m.data()[i]);
    }
}

double mean_step(const std::vector<MotionMap>& maps) {
    double s = 0.0;
    for (std::size_t t = 1; t < maps.size(); ++t)
        for (std::size_t i = 0; i < maps[t].m.size(); ++i) s += std::abs(maps[t].m.data()[i] - maps[t - 1].m.data()[i]);
    return s / ((maps.size() - 1) * maps[0].m.size());
}

TEST(MotionMapTest, EmaReducesFlicker) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        std::vector<MotionCues> seq;
        for (int t = 0; t < 12; ++t)
            seq.push_back({random_plane(8, 8, seed * 100 + t), random_plane(8, 8, seed * 100 + t + 50), Plane(8, 8)});
        const Plane edge(8, 8, 1.0);
        double flicker[2];
        for (int k = 0; k < 2; ++k) {
            MatfConfig cfg;
            cfg.ema_alpha = k == 0 ? 0.5 : 1.0;
            std::vector<MotionMap> maps;
            for (const auto& c : seq) maps.push_back(motion_map(c, edge, cfg, maps.empty() ? nullptr : &maps.back()));
            flicker[k] = mean_step(maps);
        }
        EXPECT_LE(flicker[0], flicker[1]);
    }
}

TEST(Fuse, FullTrustReturnsCurrentEstimate) {
    const auto o = random_frame(10, 10, 3, 1);
    const auto prev = random_frame(10, 10, 3, 2);
    FlowField flow(10, 10);
    flow.u = random_plane(10, 10, 3, -2, 2);
    EXPECT_EQ(fuse_adaptive(o, prev, flow, {Plane(10, 10, 1.0)}), o);
    EXPECT_EQ(fuse_fixed(o, prev, 1.0), o);
}

TEST(Fuse, ConvexInItsSources) {
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto o = random_frame(6, 6, 3, trial);
        const auto prev = random_frame(6, 6, 3, trial + 5000);
        FlowField flow(6, 6);
        flow.u = random_plane(6, 6, trial + 10000, -3, 3);
        flow.v = random_plane(6, 6, trial + 15000, -3, 3);
        const MotionMap m{random_plane(6, 6, trial + 20000)};
        const auto warped = warp(prev, flow);
        const auto out = fuse_adaptive(o, prev, flow, m);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double lo = std::min(o.data()[i], warped.data()[i]);
            const double hi = std::max(o.data()[i], warped.data()[i]);
            if (out.data()[i] < lo || out.data()[i] > hi) ++violations;
        }
    }
    EXPECT_EQ(violations, 0);
}

TEST(Fuse, AdaptiveWithUniformMapAndZeroFlowIsFixedMode) {
    const auto o = random_frame(9, 7, 3, 4);
    const auto prev = random_frame(9, 7, 3, 5);
    for (double w : {0.1, 0.5, 0.9})
        EXPECT_EQ(fuse_adaptive(o, prev, FlowField(9, 7), {Plane(9, 7, w)}), fuse_fixed(o, prev, w));
}

TEST(Fuse, GeometricAccumulation) {
    const std::vector<Frame> ones(12, Frame(1, 1, 1, 1.0));
    const auto out = fixed_recurrence(ones, 0.5, Frame(1, 1, 1, 0.0));
    for (std::size_t t = 0; t < out.size(); ++t)
        EXPECT_NEAR(out[t].at(0, 0, 0), 1.0 - std::pow(2.0, -static_cast<double>(t + 1)), 1e-15);
}

TEST(Fuse, ContributionDecaysGeometrically) {
    for (double w : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        const int n = 20;
        for (int k = 0; k < n; ++k) {
            std::vector<Frame> impulse(n, Frame(1, 1, 1, 0.0));
            impulse[n - 1 - k].at(0, 0, 0) = 1.0;
            const auto out = fixed_recurrence(impulse, w, Frame(1, 1, 1, 0.0));
            EXPECT_NEAR(out.back().at(0, 0, 0), w * std::pow(1.0 - w, k), 1e-12) << "w=" << w << " k=" << k;
        }
    }
}

TEST(Fuse, FixedFusionClipStartsFromFirstEstimate) {
    VideoSequence est;
    for (int t = 0; t < 4; ++t) est.frames.push_back(Frame(2, 2, 1, t * 0.25));
    const auto out = fixed_fusion_clip(est, 0.5);
    ASSERT_EQ(out.length(), 4u);
    EXPECT_EQ(out.frames[0], est.frames[0]);
    EXPECT_DOUBLE_EQ(out.frames[1].at(0, 0, 0), 0.125);
    EXPECT_DOUBLE_EQ(out.frames[2].at(0, 0, 0), 0.3125);
}

TEST(Fuse, SmallerWeightIsSmootherOnANoisyStaticClip) {
    std::vector<Frame> est;
    for (int t = 0; t < 40; ++t) est.push_back(random_frame(8, 8, 1, 300 + t));
    double last = -1.0;
    for (double w : {0.1, 0.25, 0.5}) {
        const auto out = fixed_recurrence(est, w, est[0]);
        double var = 0.0;
        for (int i = 0; i < 64; ++i) {
            double s = 0.0, s2 = 0.0;
            for (int t = 10; t < 40; ++t) {
                const double v = out[t].data()[i];
                s += v;
                s2 += v * v;
            }
            var += s2 / 30 - (s / 30) * (s / 30);
        }
        EXPECT_GT(var, last);
        last = var;
    }
}

TEST(StaticMaskTest, EndpointsAndMonotonicity) {
    const MatfConfig cfg;
    for (double v : testing::values(static_mask({Plane(5, 5, cfg.m_floor)}, cfg).s)) EXPECT_GT(v, 0.0);
    for (double v : testing::values(static_mask({Plane(5, 5, 1.0)}, cfg).s)) EXPECT_EQ(v, 0.0);
    Plane grid(1, 201);
    for (int i = 0; i <= 200; ++i) grid.at(0, i) = i / 200.0;
    const auto s = static_mask({grid}, cfg);
    for (int i = 1; i <= 200; ++i) EXPECT_LE(s.s.at(0, i), s.s.at(0, i - 1));
    EXPECT_EQ(s.s.at(0, 0), 1.0);
}

TEST(Config, ValidationAndWeightRenormalisation) {
    MatfConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    const auto w = cfg.effective_weights();
    EXPECT_DOUBLE_EQ(w[0], 0.5);
    EXPECT_DOUBLE_EQ(w[1], 0.5);
    EXPECT_DOUBLE_EQ(w[2], 0.0);
    cfg.use_fb = true;
    EXPECT_DOUBLE_EQ(cfg.effective_weights()[2], 0.2);
    cfg.w_fb = 0.5;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.m_floor = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.ema_alpha = 0.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    EXPECT_DOUBLE_EQ(current_weight_from_history(0.75), 0.25);
}

}  // namespace
}  // namespace turbrec
