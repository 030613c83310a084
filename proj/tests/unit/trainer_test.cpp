#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gradcheck.hpp"
#include "turbrec/checkpoint.hpp"
#include "turbrec/synthetic.hpp"
#include "turbrec/tensor_ops.hpp"
#include "turbrec/trainer.hpp"
#include "turbrec/turbsim.hpp"

namespace turbrec::trainer {
namespace {

constexpr auto f64 = torch::kFloat64;

PipelineConfig small_pipeline() {
    PipelineConfig p;
    p.mitigator.base_channels = 8;
    p.mitigator.twt_window = 4;
    p.mitigator.flow_channels = 8;
    p.mitigator.refinement_blocks = 1;
    p.mitigator.embed_dim = 16;
    return p;
}

TrainConfig small_train() {
    TrainConfig t;
    t.epochs = 1;
    t.crop = 16;
    t.lr = 1e-3;
    t.tbptt_window = 3;
    t.seed = 5;
    t.val_crop = 16;
    t.val_max_frames = 3;
    t.filter.enabled = false;
    return t;
}

datasets::PairedClip toy_clip(std::uint64_t seed, std::size_t n = 6, int size = 24) {
    const auto clean = synthetic::static_clip(synthetic::textured_image(size, size, seed), n,
                                              "toy" + std::to_string(seed));
    auto [deg, cln] = turbsim::make_paired_clip(clean, turbsim::preset(turbsim::Level::weak, seed));
    datasets::PairedClip c{deg, cln, {}};
    c.spec.scene_id = "scene" + std::to_string(seed);
    c.spec.clip_id = "clip";
    return c;
}

class TempDir {
public:
    TempDir() : path_(std::filesystem::temp_directory_path() /
                      ("turbrec_train_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++))) {
        std::filesystem::remove_all(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    static inline int counter_ = 0;
    std::filesystem::path path_;
};

TEST(Schedule, HalvesEveryFiveEpochs) {
    const TrainConfig c;
    for (int e = 0; e < 40; ++e) EXPECT_EQ(lr_at_epoch(c, e), std::ldexp(5e-5, -(e / 5))) << e;
    TrainConfig d;
    d.lr = 1e-3;
    d.lr_step = 3;
    d.lr_gamma = 0.1;
    EXPECT_EQ(lr_at_epoch(d, 2), 1e-3);
    EXPECT_NEAR(lr_at_epoch(d, 3), 1e-4, 1e-18);
    EXPECT_NEAR(lr_at_epoch(d, 7), 1e-5, 1e-19);
}

TEST(TrainConfig, Validation) {
    EXPECT_NO_THROW(TrainConfig{}.validate());
    auto c = TrainConfig{};
    c.batch = 2;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.tbptt_window = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.lr = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.max_frames_per_clip = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Filter, DropsFlatKeepsImproving) {
    const std::vector<SequenceLossTrajectory> t{{"flat", {0.5, 0.5, 0.49}}, {"improving", {0.5, 0.4, 0.3}}};
    const auto r = learnability_filter(t, 3, 0.05);
    EXPECT_FALSE(r.deferred);
    EXPECT_EQ(r.kept, std::vector<std::string>{"improving"});
    EXPECT_EQ(r.dropped, std::vector<std::string>{"flat"});
    const auto again = learnability_filter(t, 3, 0.05);
    EXPECT_EQ(again.kept, r.kept);
    EXPECT_EQ(again.dropped, r.dropped);
}

TEST(Filter, WorseningAndZeroLossAreDropped) {
    const std::vector<SequenceLossTrajectory> t{{"worse", {0.2, 0.3, 0.4}}, {"zero", {0.0, 0.0, 0.0}}};
    EXPECT_EQ(learnability_filter(t, 3, 0.0).dropped.size(), 1u);
    EXPECT_EQ(learnability_filter(t, 3, 1e-9).dropped.size(), 2u);
}

TEST(Filter, DefersUntilWarmupIsComplete) {
    const std::vector<SequenceLossTrajectory> t{{"a", {0.5, 0.5}}, {"b", {0.5, 0.1, 0.05}}};
    const auto r = learnability_filter(t, 3, 0.05);
    EXPECT_TRUE(r.deferred);
    EXPECT_EQ(r.kept.size(), 2u);
    EXPECT_TRUE(r.dropped.empty());
}

TEST(Filter, KeptSetShrinksAsThresholdRises) {
    std::vector<SequenceLossTrajectory> t;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int i = 0; i < 50; ++i) t.push_back({"s" + std::to_string(i), {u(rng), u(rng), u(rng)}});
    std::vector<std::string> previous;
    for (int i = 0; i <= 40; ++i) {
        auto kept = learnability_filter(t, 3, -1.0 + 0.05 * i).kept;
        std::sort(kept.begin(), kept.end());
        if (i > 0) EXPECT_TRUE(std::includes(previous.begin(), previous.end(), kept.begin(), kept.end())) << i;
        previous = kept;
    }
    EXPECT_TRUE(previous.empty());
}

TEST(CheckpointSelect, PrefersCombinedScore) {
    EXPECT_EQ(checkpoint_select({{30.0, 0.80, 0.0}, {31.0, 0.79, 0.0}}), 1u);
    EXPECT_EQ(checkpoint_select({{31.0, 0.70, 0.0}, {30.0, 0.80, 0.0}, {29.0, 0.75, 0.0}}), 1u);
}

TEST(CheckpointSelect, TiesGoToTheLaterEpoch) {
    EXPECT_EQ(checkpoint_select({{30.0, 0.8, 0.0}, {30.0, 0.8, 0.0}, {25.0, 0.1, 0.0}}), 1u);
    EXPECT_THROW(checkpoint_select({}), std::invalid_argument);
}

TEST(TrainWindow, StateIsCutBetweenWindows) {
    Trainer trainer(small_pipeline(), small_train());
    trainer.model()->to(f64);
    testing::randomize_zero_heads(*trainer.model());
    const auto c = toy_clip(1, 6, 16);
    std::vector<torch::Tensor> in, tg;
    for (std::size_t t = 0; t < 6; ++t) {
        in.push_back(tensor::from_frame(c.degraded.frames[t], f64));
        tg.push_back(tensor::from_frame(c.clean.frames[t], f64));
    }
    auto x0 = in[0].clone().requires_grad_(true);
    auto state = mitigator::RecurrentState::initial(x0, 2);
    const std::vector<double> levels(3, 0.5);
    const auto w1 = trainer.train_window({in[0], in[1], in[2]}, {tg[0], tg[1], tg[2]}, levels, state);
    ASSERT_TRUE(w1.finite);
    ASSERT_TRUE(x0.grad().defined());
    const auto g1 = x0.grad().clone();
    EXPECT_GT(g1.abs().max().item<double>(), 0.0);
    EXPECT_FALSE(state.prev_output.requires_grad());
    for (const auto& [o, f] : state.buffer) {
        EXPECT_FALSE(o.requires_grad());
        EXPECT_FALSE(f.requires_grad());
    }
    const auto w2 = trainer.train_window({in[3], in[4], in[5]}, {tg[3], tg[4], tg[5]}, levels, state);
    ASSERT_TRUE(w2.finite);
    // The second window back-propagates nothing into the first state.
    EXPECT_TRUE(torch::equal(x0.grad(), g1));
    EXPECT_EQ(trainer.step(), 2);
    EXPECT_EQ(w2.entry.frames, 3);
}

TEST(TrainWindow, UpdatesParametersAndLogsTerms) {
    Trainer trainer(small_pipeline(), small_train());
    const auto c = toy_clip(2, 4, 16);
    std::vector<torch::Tensor> in, tg;
    for (std::size_t t = 0; t < 3; ++t) {
        in.push_back(tensor::from_frame(c.degraded.frames[t]));
        tg.push_back(tensor::from_frame(c.clean.frames[t]));
    }
    std::vector<torch::Tensor> before;
    for (const auto& p : trainer.model()->parameters()) before.push_back(p.detach().clone());
    auto state = mitigator::RecurrentState::initial(in[0], 2);
    const auto w = trainer.train_window(in, tg, {0.2, 0.2, 0.2}, state);
    EXPECT_TRUE(w.finite);
    EXPECT_GT(w.entry.rec, 0.0);
    EXPECT_GE(w.entry.temp, 0.0);
    EXPECT_GT(w.entry.flow, 0.0);
    EXPECT_NEAR(w.entry.lr, 1e-3, 1e-15);
    bool changed = false;
    const auto after = trainer.model()->parameters();
    for (std::size_t i = 0; i < after.size(); ++i) changed |= !torch::equal(after[i], before[i]);
    EXPECT_TRUE(changed);
}

TEST(Train, SeededRunsAreIdentical) {
    const std::vector<datasets::PairedClip> clips{toy_clip(3), toy_clip(4)};
    auto cfg = small_train();
    cfg.max_steps = 10;
    auto run = [&](std::uint64_t seed) {
        auto c = cfg;
        c.seed = seed;
        Trainer t(small_pipeline(), c);
        auto r = t.train(clips, {});
        std::vector<torch::Tensor> params;
        for (const auto& p : t.model()->parameters()) params.push_back(p.detach().clone());
        return std::pair{r, params};
    };
    const auto [a, pa] = run(5);
    const auto [b, pb] = run(5);
    const auto [c, pc] = run(6);
    ASSERT_EQ(a.steps, 4);  // 2 clips x ceil(6 / 3) windows in the single epoch
    ASSERT_EQ(a.log.size(), b.log.size());
    EXPECT_EQ(a.log.front().total, b.log.front().total);
    EXPECT_EQ(a.log.back().total, b.log.back().total);
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::equal(pa[i], pb[i]));
    bool differs = false;
    for (std::size_t i = 0; i < pa.size(); ++i) differs |= !torch::equal(pa[i], pc[i]);
    EXPECT_TRUE(differs);
}

TEST(Train, StopsAtMaxStepsAndWritesArtifacts) {
    TempDir dir;
    const std::vector<datasets::PairedClip> clips{toy_clip(5, 8), toy_clip(6, 8)};
    auto cfg = small_train();
    cfg.epochs = 3;
    cfg.max_steps = 10;
    Trainer trainer(small_pipeline(), cfg);
    TrainOptions opts;
    opts.out_dir = dir.path();
    int steps_seen = 0;
    opts.on_step = [&](const LogEntry&) { ++steps_seen; };
    const auto r = trainer.train(clips, {clips[0]}, opts);
    EXPECT_EQ(r.steps, 10);
    EXPECT_EQ(steps_seen, 10);
    EXPECT_EQ(r.validation.size(), static_cast<std::size_t>(r.epochs_run));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "last" / "manifest.json"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "best" / "manifest.json"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "config.json"));
    std::ifstream log(dir.path() / "train_log.ndjson");
    int lines = 0;
    for (std::string line; std::getline(log, line);) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_TRUE(j.contains("terms"));
        ++lines;
    }
    EXPECT_EQ(lines, 10);

    const auto info = checkpoint::read_info(dir.path() / "last");
    EXPECT_EQ(info.step, 10);
    Trainer resumed(small_pipeline(), cfg);
    resumed.resume(dir.path() / "last");
    EXPECT_EQ(resumed.step(), 10);
    EXPECT_EQ(resumed.calibration().s_min, trainer.calibration().s_min);
}

TEST(Train, FilterRunsOnceAfterWarmup) {
    const std::vector<datasets::PairedClip> clips{toy_clip(7, 4), toy_clip(8, 4)};
    auto cfg = small_train();
    cfg.epochs = 3;
    cfg.filter.enabled = true;
    cfg.filter.warmup_epochs = 2;
    cfg.filter.slope_threshold = -1e9;  // keep everything
    Trainer trainer(small_pipeline(), cfg);
    const auto r = trainer.train(clips, {});
    ASSERT_TRUE(r.filter.has_value());
    EXPECT_EQ(r.filter->kept.size(), 2u);
    EXPECT_EQ(r.trajectories.size(), 2u);
    for (const auto& t : r.trajectories) EXPECT_EQ(t.epoch_loss.size(), 3u);
}

TEST(Ablation, HarnessEmitsFourRows) {
    const std::vector<datasets::PairedClip> clips{toy_clip(9, 4)};
    auto cfg = small_train();
    cfg.max_steps = 1;
    const auto report = run_ablation(clips, {}, small_pipeline(), cfg);
    ASSERT_EQ(report.rows.size(), 4u);
    EXPECT_EQ(report.rows[0].ablation, Ablation::full);
    EXPECT_EQ(report.rows[1].ablation, Ablation::no_matf);
    EXPECT_EQ(report.rows[2].ablation, Ablation::no_mswarp);
    EXPECT_EQ(report.rows[3].ablation, Ablation::no_level);
    const auto table = report.table();
    EXPECT_NE(table.find("w/o MATF"), std::string::npos);
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
    EXPECT_EQ(report.to_json()["rows"].size(), 4u);
}

}  // namespace
}  // namespace turbrec::trainer
