#pragma once

#include <optional>
#include <string>
#include <torch/torch.h>
#include <vector>

#include "turbrec/conditioning.hpp"
#include "turbrec/losses.hpp"
#include "turbrec/matf.hpp"
#include "turbrec/mitigator.hpp"

namespace turbrec {

enum class Ablation { full, no_matf, no_mswarp, no_level };
Ablation parse_ablation(const std::string& name);
std::string ablation_name(Ablation a);

struct ConditioningConfig {
    std::string scorer = "analytic";  // "analytic" or "external"
    std::string external_scores;      // JSON sidecar for the external scorer
    std::optional<conditioning::Calibration> calibration;  // unset: calibrate from data
    double proxy_scale = 0.01;
};

struct PipelineConfig {
    mitigator::MitigatorConfig mitigator;
    matf::MatfConfig matf;
    losses::LossConfig losses;
    ConditioningConfig conditioning;
    std::size_t history = 2;  // prediction buffer length K

    void validate() const;
};

/// no_matf: fixed pass-through fusion (w = 1); no_mswarp: identity warps
/// in every TWT block; no_level: zero level embedding.
PipelineConfig apply_ablation(PipelineConfig config, Ablation ablation);

/// Everything produced while advancing the recurrence by one frame.
struct FrameResult {
    mitigator::StepOutput step;
    torch::Tensor output;       // O_t, the propagated state
    torch::Tensor prev_output;  // O_{t-1} used for this frame
    std::optional<matf::MotionMap> motion_map;
    torch::Tensor static_mask;  // N x 1 x H x W, undefined at t = 0
    std::vector<torch::Tensor> history;        // O_{t-k}, k = 1..
    std::vector<torch::Tensor> history_flows;  // F_t^(k), k = 1..
};

/// Runs the backbone on `input` against the state, fuses (O_0 = Ô_0 at
/// t = 0; adaptive MATF or fixed-weight afterwards) and advances the state.
/// Motion maps are computed from detached values; the fused output stays
/// differentiable in Ô_t, O_{t-1} and the flow.
FrameResult process_frame(mitigator::Mitigator& model, const PipelineConfig& config, const torch::Tensor& input,
                          mitigator::RecurrentState& state, const torch::Tensor& level);

/// Where per-frame turbulence levels come from at inference.
struct LevelSource {
    std::optional<double> fixed;
    const conditioning::QualityScorer* scorer = nullptr;
    conditioning::Calibration calibration;

    double level(const Frame& frame, const std::string& frame_id) const;
};

struct RestoreTrace {
    std::vector<double> levels;
    std::vector<Frame> intermediate;  // Ô_t
    std::vector<Plane> motion_maps;   // empty entry at t = 0
    std::vector<FlowField> flows;
};

/// Inference driver: constant memory per frame, no autograd. Frames are
/// bridged to tensors in double precision, so the residual path is exact.
class RecurrentRestorer {
public:
    RecurrentRestorer(mitigator::Mitigator model, PipelineConfig config);

    VideoSequence restore(const VideoSequence& input, const LevelSource& levels, RestoreTrace* trace = nullptr);

    mitigator::Mitigator& model() noexcept { return model_; }

private:
    mitigator::Mitigator model_;
    PipelineConfig config_;
};

}  // namespace turbrec
