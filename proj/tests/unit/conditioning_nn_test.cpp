#include <gtest/gtest.h>

#include <array>

#include "gradcheck.hpp"
#include "turbrec/conditioning_nn.hpp"
#include "turbrec/frame.hpp"

namespace turbrec::conditioning {
namespace {

constexpr auto f64 = torch::kFloat64;

torch::Tensor levels(std::initializer_list<double> v) {
    return torch::tensor(std::vector<double>(v), torch::dtype(f64));
}

TEST(LevelEmbedding, ShapeAndDeterminism) {
    torch::manual_seed(1);
    LevelEmbedding emb(32);
    emb->to(f64);
    const auto a = emb(levels({0.0, 0.3, 1.0}));
    EXPECT_EQ(a.sizes(), (std::vector<int64_t>{3, 32}));
    EXPECT_TRUE(torch::equal(a, emb(levels({0.0, 0.3, 1.0}))));
    EXPECT_TRUE(torch::equal(a, emb(levels({0.0, 0.3, 1.0}).unsqueeze(1))));
    EXPECT_FALSE(torch::equal(a[0], a[2]));
}

TEST(LevelEmbedding, GradientMatchesFiniteDifferences) {
    torch::manual_seed(2);
    LevelEmbedding emb(16);
    emb->to(f64);
    auto lv = levels({0.1, 0.55, 0.9}).requires_grad_(true);
    auto leaves = testing::parameters_of(*emb);
    leaves.push_back(lv);
    const auto r = testing::gradcheck([&] { return testing::project(emb(lv)); }, leaves);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.describe();
}

class ModulationShapes : public ::testing::TestWithParam<std::array<int64_t, 3>> {};

TEST_P(ModulationShapes, PreservesShapeAndNormalisesAttention) {
    const auto [c, h, w] = GetParam();
    torch::manual_seed(3);
    CrossAttentionModulation mod(c, 64);
    mod->to(f64);
    const auto f = torch::randn({2, c, h, w}, torch::dtype(f64));
    const auto emb = torch::randn({2, 64}, torch::dtype(f64));
    const auto r = mod(f, emb);
    EXPECT_EQ(r.features.sizes(), f.sizes());
    EXPECT_EQ(r.attention.sizes(), (std::vector<int64_t>{2, h * w}));
    EXPECT_LT((r.attention.sum(-1) - 1.0).abs().max().item<double>(), 1e-6);
    EXPECT_GE(r.attention.min().item<double>(), 0.0);
    EXPECT_EQ(r.gain.sizes(), (std::vector<int64_t>{2, c}));
    // Gain multiplier 1 + tanh(.) lies in (0, 2).
    const auto ratio = (1.0 + r.gain);
    EXPECT_GT(ratio.min().item<double>(), 0.0);
    EXPECT_LT(ratio.max().item<double>(), 2.0);
}

INSTANTIATE_TEST_SUITE_P(Scales, ModulationShapes,
                         ::testing::Values(std::array<int64_t, 3>{16, 32, 32}, std::array<int64_t, 3>{32, 16, 16},
                                           std::array<int64_t, 3>{64, 8, 8}));

TEST(Modulation, RejectsChannelMismatch) {
    CrossAttentionModulation mod(16, 8);
    EXPECT_THROW(mod(torch::zeros({1, 8, 4, 4}), torch::zeros({1, 8})), ShapeError);
    EXPECT_THROW(mod(torch::zeros({16, 4, 4}), torch::zeros({1, 8})), ShapeError);
}

TEST(Modulation, DifferentLevelsGiveDifferentFeatures) {
    torch::manual_seed(4);
    LevelEmbedding emb(64);
    CrossAttentionModulation mod(16, 64);
    emb->to(f64);
    mod->to(f64);
    const auto f = torch::randn({1, 16, 8, 8}, torch::dtype(f64));
    const auto lo = mod(f, emb(levels({0.0}))).features;
    const auto hi = mod(f, emb(levels({1.0}))).features;
    EXPECT_GT((lo - hi).abs().max().item<double>(), 1e-6);
}

TEST(Modulation, GradientMatchesFiniteDifferences) {
    torch::manual_seed(5);
    CrossAttentionModulation mod(8, 12, 4);
    mod->to(f64);
    auto f = torch::randn({2, 8, 5, 6}, torch::dtype(f64)).requires_grad_(true);
    auto emb = torch::randn({2, 12}, torch::dtype(f64)).requires_grad_(true);
    auto leaves = testing::parameters_of(*mod);
    leaves.push_back(f);
    leaves.push_back(emb);
    const auto r = testing::gradcheck([&] { return testing::project(mod(f, emb).features); }, leaves);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.describe();
}

}  // namespace
}  // namespace turbrec::conditioning
