#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "turbrec/datasets.hpp"
#include "turbrec/pipeline.hpp"

namespace turbrec::trainer {

namespace fs = std::filesystem;

struct FilterConfig {
    bool enabled = true;
    int warmup_epochs = 3;
    double slope_threshold = 0.05;
};

struct TrainConfig {
    int epochs = 100;
    int crop = 256;
    int batch = 1;
    double lr = 5e-5;
    int lr_step = 5;
    double lr_gamma = 0.5;
    int tbptt_window = 4;
    std::uint64_t seed = 0;
    Ablation ablation = Ablation::full;
    std::optional<std::int64_t> max_steps;  // stop after this many optimizer steps
    std::optional<int> max_frames_per_clip;  // random contiguous window per epoch
    int val_crop = 0;                        // centre crop for validation; 0 keeps full frames
    std::optional<int> val_max_frames;
    FilterConfig filter;

    void validate() const;
};

/// lr * gamma^floor(epoch / lr_step).
double lr_at_epoch(const TrainConfig& config, int epoch);

struct SequenceLossTrajectory {
    std::string seq_id;
    std::vector<double> epoch_loss;  // one mean loss per completed epoch
};

struct FilterResult {
    std::vector<std::string> kept;
    std::vector<std::string> dropped;
    bool deferred = false;  // some trajectory was shorter than the warm-up
};

/// Relative improvement (L_first - L_last) / L_first over each trajectory;
/// sequences below slope_threshold are dropped. Defers (drops nothing)
/// unless every trajectory has at least warmup_epochs entries.
FilterResult learnability_filter(const std::vector<SequenceLossTrajectory>& trajectories, int warmup_epochs,
                                 double slope_threshold);

struct ValMetrics {
    double psnr = 0.0;
    double ssim = 0.0;
    double input_psnr = 0.0;  // degraded input against the reference
};

/// Argmax of psnr / psnr_reference + ssim; ties go to the later epoch.
/// Returns a 0-based index.
std::size_t checkpoint_select(const std::vector<ValMetrics>& per_epoch, double psnr_reference = 50.0);

struct LogEntry {
    std::int64_t step = 0;
    int epoch = 0;
    std::string seq_id;
    double lr = 0.0;
    double rec = 0.0, dwt = 0.0, lap = 0.0, temp = 0.0, flow = 0.0;
    double total = 0.0;
    int frames = 0;
    bool skipped = false;  // non-finite loss, no update applied
};

struct TrainResult {
    std::int64_t steps = 0;
    int epochs_run = 0;
    std::vector<LogEntry> log;
    std::vector<ValMetrics> validation;
    std::size_t best_epoch = 0;
    std::vector<SequenceLossTrajectory> trajectories;
    std::optional<FilterResult> filter;
    std::int64_t skipped_steps = 0;
};

struct TrainOptions {
    std::optional<fs::path> out_dir;  // checkpoints and train_log.ndjson
    std::function<void(const LogEntry&)> on_step;
    std::function<void(int, const ValMetrics&)> on_epoch;
};

/// Full training session over in-memory paired clips.
class Trainer {
public:
    Trainer(PipelineConfig pipeline, TrainConfig config);

    TrainResult train(const std::vector<datasets::PairedClip>& train_clips,
                      const std::vector<datasets::PairedClip>& val_clips, const TrainOptions& options = {});

    /// Validation of the current weights: mean PSNR / SSIM of the restored
    /// clips against their clean twins.
    ValMetrics validate(const std::vector<datasets::PairedClip>& clips);

    mitigator::Mitigator& model() noexcept { return model_; }
    torch::optim::Adam& optimizer() noexcept { return *optimizer_; }
    const PipelineConfig& pipeline() const noexcept { return pipeline_; }
    const TrainConfig& config() const noexcept { return config_; }
    conditioning::Calibration calibration() const noexcept { return calibration_; }

    /// Restores weights, optimizer moments and the step/epoch counters.
    void resume(const fs::path& checkpoint_dir);

    struct WindowLoss {
        LogEntry entry;
        bool finite = true;
    };
    /// One truncated-BPTT window: runs the frames through the recurrence,
    /// back-propagates the mean total loss, applies one Adam update (when
    /// finite) and detaches the state. Inputs and targets are N x 3 x H x W.
    WindowLoss train_window(const std::vector<torch::Tensor>& inputs, const std::vector<torch::Tensor>& targets,
                            const std::vector<double>& levels, mitigator::RecurrentState& state);

    std::int64_t step() const noexcept { return step_; }

private:
    PipelineConfig pipeline_;
    TrainConfig config_;
    mitigator::Mitigator model_{nullptr};
    std::unique_ptr<torch::optim::Adam> optimizer_;
    conditioning::Calibration calibration_;
    bool calibrated_ = false;
    std::int64_t step_ = 0;
    int start_epoch_ = 0;
};

struct AblationRow {
    Ablation ablation = Ablation::full;
    std::string label;
    double psnr = 0.0;
    double ssim = 0.0;
    double input_psnr = 0.0;
    std::int64_t steps = 0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    std::string table() const;
    nlohmann::json to_json() const;
};

/// Trains the four architecture variants with one seed and one data set and
/// reports the final validation metrics of each.
AblationReport run_ablation(const std::vector<datasets::PairedClip>& train_clips,
                            const std::vector<datasets::PairedClip>& val_clips, const PipelineConfig& pipeline,
                            const TrainConfig& config, const std::optional<fs::path>& out_dir = std::nullopt);

/// Loads every clip below root. With train/ and val/ subdirectories those
/// define the split; otherwise scenes are split by seed.
std::pair<std::vector<datasets::PairedClip>, std::vector<datasets::PairedClip>> load_dataset(const fs::path& root,
                                                                                            std::uint64_t seed);

}  // namespace turbrec::trainer
