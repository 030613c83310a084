#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "turbrec/frame.hpp"
#include "turbrec/losses.hpp"
#include "turbrec/tensor_ops.hpp"

namespace turbrec::losses {
namespace {

constexpr auto f64 = torch::kFloat64;

torch::Tensor img(std::uint64_t seed, int64_t n = 1, int64_t c = 3, int64_t h = 8, int64_t w = 8) {
    auto gen = torch::make_generator<torch::CPUGeneratorImpl>(seed);
    return torch::rand({n, c, h, w}, gen, torch::dtype(f64));
}

torch::Tensor flow_field(std::uint64_t seed, int64_t h = 8, int64_t w = 8) {
    auto gen = torch::make_generator<torch::CPUGeneratorImpl>(seed);
    return 0.3 + 0.4 * torch::rand({1, 2, h, w}, gen, torch::dtype(f64));
}

double value(const torch::Tensor& t) { return t.item<double>(); }

TEST(Charbonnier, EqualInputsGiveEpsilon) {
    const auto a = img(1);
    EXPECT_DOUBLE_EQ(value(charbonnier(a, a, 1e-3)), 1e-3);
    EXPECT_DOUBLE_EQ(value(charbonnier(a, a, 0.25)), 0.25);
}

TEST(Charbonnier, PythagoreanTriple) {
    const auto o = torch::full({1, 1, 2, 2}, 3.0, torch::dtype(f64));
    const auto t = torch::zeros({1, 1, 2, 2}, torch::dtype(f64));
    EXPECT_EQ(value(charbonnier(o, t, 4.0)), 5.0);
}

TEST(Charbonnier, SymmetricAndApproachesL1) {
    const auto a = img(2), b = img(3);
    EXPECT_EQ(value(charbonnier(a, b, 1e-3)), value(charbonnier(b, a, 1e-3)));
    const double l1 = value((a - b).abs().mean());
    EXPECT_GE(value(charbonnier(a, b, 1e-3)), l1);
    EXPECT_LT(value(charbonnier(a, b, 1e-3)) - l1, 1e-3);
}

TEST(Charbonnier, RejectsShapeMismatch) {
    EXPECT_THROW(charbonnier(img(1, 1, 3, 8, 8), img(1, 1, 3, 8, 9), 1e-3), ShapeError);
}

TEST(Charbonnier, GradientMatchesFiniteDifferences) {
    auto o = img(4).requires_grad_(true);
    auto t = img(5).requires_grad_(true);
    const auto r = testing::gradcheck([&] { return charbonnier(o, t, 1e-3); }, {o, t});
    EXPECT_LT(r.max_rel_error, 1e-6) << r.describe();
}

TEST(DwtLoss, ZeroForEqualInputs) {
    const auto a = img(6);
    EXPECT_EQ(value(dwt_loss(a, a)), 0.0);
}

TEST(DwtLoss, ConstantOffsetLandsInLowBandOnly) {
    // Each 2x2 block of a constant offset c has LL = (c + c + c + c) / 2 = 2c
    // and zero detail bands; the mean over four equal-size bands is 2|c| / 4.
    const auto t = img(7);
    for (double c : {0.1, -0.3, 0.05}) EXPECT_NEAR(value(dwt_loss(t + c, t)), 0.5 * std::abs(c), 1e-14) << c;
}

TEST(DwtLoss, GradientMatchesFiniteDifferences) {
    auto o = img(8).requires_grad_(true);
    auto t = img(9);
    const auto r = testing::gradcheck([&] { return dwt_loss(o, t); }, {o});
    EXPECT_LT(r.max_rel_error, 1e-4) << r.describe();
}

TEST(LaplacianLoss, ConstantOffsetIsInTheNullSpace) {
    const auto t = img(10);
    EXPECT_LT(value(laplacian_loss(t + 0.2, t)), 1e-14);
    EXPECT_GT(value(laplacian_loss(img(11), t)), 0.1);
}

TEST(LaplacianLoss, MatchesHandComputedImpulse) {
    // A unit impulse in the interior of a zero image has Laplacian
    // -4 at the centre and +1 at its four neighbours: 8 / (H W) mean.
    auto o = torch::zeros({1, 1, 6, 6}, torch::dtype(f64));
    o[0][0][3][2] = 1.0;
    EXPECT_NEAR(value(laplacian_loss(o, torch::zeros_like(o))), 8.0 / 36.0, 1e-15);
}

TEST(LaplacianLoss, GradientMatchesFiniteDifferences) {
    auto o = img(12).requires_grad_(true);
    auto t = img(13);
    const auto r = testing::gradcheck([&] { return laplacian_loss(o, t); }, {o});
    EXPECT_LT(r.max_rel_error, 1e-4) << r.describe();
}

TEST(TemporalLoss, ZeroMaskGivesZero) {
    const auto s = torch::zeros({1, 1, 8, 8}, torch::dtype(f64));
    EXPECT_EQ(value(temporal_static_loss(img(14), img(15), flow_field(1), s)), 0.0);
}

TEST(TemporalLoss, ZeroWhenOutputMatchesWarpedPrevious) {
    const auto prev = img(16);
    const auto flow = flow_field(2);
    const auto s = torch::ones({1, 1, 8, 8}, torch::dtype(f64));
    EXPECT_EQ(value(temporal_static_loss(tensor::warp(prev, flow), prev, flow, s)), 0.0);
}

TEST(TemporalLoss, NormalisedByMaskMean) {
    // Mask on half the pixels, a constant gap g there: mean(S |d|) = g / 2,
    // divided by mean(S) + delta = 1/2 + delta.
    const auto prev = torch::zeros({1, 3, 4, 4}, torch::dtype(f64));
    const auto o = torch::full({1, 3, 4, 4}, 0.3, torch::dtype(f64));
    auto s = torch::zeros({1, 1, 4, 4}, torch::dtype(f64));
    s.narrow(3, 0, 2).fill_(1.0);
    const auto zero_flow = torch::zeros({1, 2, 4, 4}, torch::dtype(f64));
    EXPECT_NEAR(value(temporal_static_loss(o, prev, zero_flow, s, 1e-6)), 0.15 / (0.5 + 1e-6), 1e-15);
}

TEST(TemporalLoss, MaskAndFlowReceiveNoGradient) {
    auto o = img(17).requires_grad_(true);
    auto prev = img(18).requires_grad_(true);
    auto flow = flow_field(3).requires_grad_(true);
    auto s = torch::rand({1, 1, 8, 8}, torch::dtype(f64)).requires_grad_(true);
    const auto grads =
        torch::autograd::grad({temporal_static_loss(o, prev, flow, s)}, {o, prev, flow, s}, {}, false, false, true);
    EXPECT_TRUE(grads[0].defined());
    EXPECT_TRUE(grads[1].defined());
    EXPECT_GT(grads[0].abs().max().item<double>(), 0.0);
    EXPECT_GT(grads[1].abs().max().item<double>(), 0.0);
    EXPECT_FALSE(grads[2].defined());
    EXPECT_FALSE(grads[3].defined());
}

TEST(TemporalLoss, GradientMatchesFiniteDifferences) {
    auto o = img(19).requires_grad_(true);
    auto prev = img(20).requires_grad_(true);
    const auto flow = flow_field(4);
    const auto s = torch::rand({1, 1, 8, 8}, torch::dtype(f64));
    const auto r = testing::gradcheck([&] { return temporal_static_loss(o, prev, flow, s); }, {o, prev});
    EXPECT_LT(r.max_rel_error, 1e-4) << r.describe();
}

TEST(TemporalLoss, RejectsMismatchedMask) {
    EXPECT_THROW(temporal_static_loss(img(1), img(2), flow_field(1), torch::ones({1, 1, 4, 4})), ShapeError);
}

TEST(FlowLoss, SkippedWithoutHistory) {
    const auto r = multistep_flow_loss(img(21), {}, {}, {1, 2}, 1e-3);
    EXPECT_TRUE(r.skipped);
    EXPECT_EQ(r.used_offsets, 0);
    EXPECT_EQ(value(r.value), 0.0);
}

TEST(FlowLoss, StaticHistoryGivesEpsilon) {
    const auto o = img(22);
    const auto zero = torch::zeros({1, 2, 8, 8}, torch::dtype(f64));
    const auto r = multistep_flow_loss(o, {o, o}, {zero, zero}, {1, 2}, 1e-3);
    EXPECT_EQ(r.used_offsets, 2);
    EXPECT_DOUBLE_EQ(value(r.value), 1e-3);
}

TEST(FlowLoss, SingleOffsetEqualsCharbonnierOnWarpedPrevious) {
    const auto o = img(23), prev = img(24);
    const auto flow = flow_field(5);
    const auto r = multistep_flow_loss(o, {prev}, {flow}, {1, 2}, 1e-3);
    EXPECT_EQ(r.used_offsets, 1);
    EXPECT_EQ(value(r.value), value(charbonnier(o, tensor::warp(prev, flow), 1e-3)));
}

TEST(FlowLoss, AveragesOverUsedOffsets) {
    const auto o = img(25), h1 = img(26), h2 = img(27);
    const auto f1 = flow_field(6), f2 = flow_field(7);
    const auto r = multistep_flow_loss(o, {h1, h2}, {f1, f2}, {1, 2}, 1e-3);
    const double expected =
        (value(charbonnier(o, tensor::warp(h1, f1), 1e-3)) + value(charbonnier(o, tensor::warp(h2, f2), 1e-3))) / 2;
    EXPECT_NEAR(value(r.value), expected, 1e-15);
}

TEST(FlowLoss, GradientMatchesFiniteDifferences) {
    auto o = img(28).requires_grad_(true);
    auto h = img(29).requires_grad_(true);
    auto f = flow_field(8).requires_grad_(true);
    const auto r = testing::gradcheck([&] { return multistep_flow_loss(o, {h}, {f}, {1}, 1e-3).value; }, {o, h, f});
    EXPECT_LT(r.max_rel_error, 1e-4) << r.describe();
}

LossInputs full_inputs(std::uint64_t seed, int64_t h = 8, int64_t w = 8) {
    LossInputs in;
    in.output = img(seed, 1, 3, h, w);
    in.target = img(seed + 1, 1, 3, h, w);
    in.prev_output = img(seed + 2, 1, 3, h, w);
    in.flow = flow_field(seed, h, w);
    auto gen = torch::make_generator<torch::CPUGeneratorImpl>(seed + 3);
    in.static_mask = torch::rand({1, 1, h, w}, gen, torch::dtype(f64));
    in.history = {in.prev_output, img(seed + 4, 1, 3, h, w)};
    in.history_flows = {in.flow, flow_field(seed + 5, h, w)};
    return in;
}

TEST(TotalLoss, ZeroWeightsReduceToReconstruction) {
    LossConfig c;
    c.lambda_dwt = c.lambda_lap = c.lambda_temp = c.lambda_flow = 0.0;
    const auto in = full_inputs(30);
    const auto r = total_loss(in, c);
    EXPECT_EQ(r.total_value, r.rec);
    EXPECT_EQ(r.rec, value(charbonnier(in.output, in.target, c.epsilon)));
}

TEST(TotalLoss, ReportedTermsMatchDirectEvaluation) {
    const LossConfig c;
    const auto in = full_inputs(31);
    const auto r = total_loss(in, c);
    EXPECT_EQ(r.dwt, value(dwt_loss(in.output, in.target)));
    EXPECT_EQ(r.lap, value(laplacian_loss(in.output, in.target)));
    EXPECT_EQ(r.temp, value(temporal_static_loss(in.output, in.prev_output, in.flow, in.static_mask, c.mask_delta)));
    EXPECT_FALSE(r.flow_skipped);
    EXPECT_NEAR(r.total_value, r.recomputed_total(c), 1e-9);
}

TEST(TotalLoss, TemporalAndFlowTermsDropOutAtFirstFrame) {
    LossInputs in;
    in.output = img(32);
    in.target = img(33);
    const LossConfig c;
    const auto r = total_loss(in, c);
    EXPECT_EQ(r.temp, 0.0);
    EXPECT_TRUE(r.flow_skipped);
    EXPECT_NEAR(r.total_value, r.rec + c.lambda_dwt * r.dwt + c.lambda_lap * r.lap, 1e-15);
}

TEST(TotalLoss, RandomBatchesAreFiniteNonNegativeAndConsistent) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> lam(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        LossConfig c;
        c.lambda_dwt = lam(rng);
        c.lambda_lap = lam(rng);
        c.lambda_temp = lam(rng);
        c.lambda_flow = lam(rng);
        auto in = full_inputs(1000 + 7 * i, 6, 6);
        if (i % 3 == 0) in.history.resize(1);
        if (i % 5 == 0) in.static_mask = torch::Tensor();
        const auto r = total_loss(in, c);
        ASSERT_TRUE(std::isfinite(r.total_value)) << i;
        ASSERT_GE(r.total_value, 0.0) << i;
        ASSERT_NEAR(r.total_value, r.recomputed_total(c), 1e-9) << i;
    }
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
    auto in = full_inputs(34);
    in.output.requires_grad_(true);
    in.prev_output.requires_grad_(true);
    in.history[0] = in.prev_output;
    const LossConfig c;
    const auto r = testing::gradcheck([&] { return total_loss(in, c).total; }, {in.output, in.prev_output});
    EXPECT_LT(r.max_rel_error, 1e-4) << r.describe();
}

TEST(LossConfig, Validation) {
    LossConfig c;
    EXPECT_NO_THROW(c.validate());
    c.epsilon = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.lambda_temp = -1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.flow_offsets = {0};
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace turbrec::losses
