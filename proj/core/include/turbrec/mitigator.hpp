#pragma once

#include <deque>
#include <optional>
#include <torch/torch.h>
#include <vector>

#include "turbrec/conditioning_nn.hpp"
#include "turbrec/matf.hpp"

// Recurrent restoration backbone. Feature maps are N x C x H x W where the
// first C/2 channels carry the previous-frame stream and the last C/2 the
// current-frame stream; 3D convolutions see them as a two-step volume with
// causal temporal kernels, so the previous half never depends on I_t.
namespace turbrec::mitigator {

struct MitigatorConfig {
    int64_t base_channels = 16;
    int scales = 3;
    int64_t twt_heads = 2;
    int64_t twt_window = 8;
    int64_t flow_channels = 16;
    int refinement_blocks = 2;
    bool conditioning = true;     // false: the level embedding is replaced by zeros
    bool multiscale_warp = true;  // false: flows and offsets are forced to zero
    int64_t embed_dim = 64;

    void validate() const;
};

/// Flows in pixels at their own resolution; map current -> previous, so
/// warp(prev, flow) aligns the previous frame to the current one.
struct FlowSet {
    std::vector<torch::Tensor> scale_flows;       // [full, half, quarter]
    std::vector<torch::Tensor> refinement_flows;  // residual flows of the refinement blocks
    torch::Tensor final_flow;                     // full resolution, F_t^(1)
};

struct StepOutput {
    torch::Tensor o_hat;     // clamp(I_t + residual, 0, 1), dtype of I_t
    torch::Tensor residual;  // decoder output, model dtype
    FlowSet flows;
};

/// Per-clip recurrence state. The buffer holds (O_{t-k}, F_{t-k}^(1)) with
/// the newest entry first.
struct RecurrentState {
    torch::Tensor prev_output;
    std::optional<matf::MotionMap> prev_motion_map;
    std::deque<std::pair<torch::Tensor, torch::Tensor>> buffer;
    std::size_t capacity = 2;
    int64_t t = 0;

    /// State before frame 0: prev_output := I_0, empty history.
    static RecurrentState initial(const torch::Tensor& first_frame, std::size_t capacity = 2);
    void push(const torch::Tensor& output, const torch::Tensor& flow);
    /// Cuts the autograd graph at the current state.
    void detach();
};

/// F^(1) = current; F^(k) = F^(1) + warp(F_{t-1}^(k-1), F^(1)) using the
/// previous steps' first-order flows from the buffer (newest first).
std::vector<torch::Tensor> compose_flows(const torch::Tensor& current, const std::vector<torch::Tensor>& past,
                                         std::size_t max_offset);

/// Two-step volume helpers for the channel-halves layout.
torch::Tensor to_volume(const torch::Tensor& planes);  // N x C x H x W -> N x C/2 x 2 x H x W
torch::Tensor to_planes(const torch::Tensor& volume);  // inverse

/// 3D convolution with kernel (2, k, k) and zero padding at the front of the
/// time axis only, keeping two time steps.
class CausalConv3dImpl : public torch::nn::Module {
public:
    CausalConv3dImpl(int64_t in, int64_t out, int64_t kernel = 3, int64_t stride = 1);
    torch::Tensor forward(const torch::Tensor& volume);

private:
    torch::nn::Conv3d conv_{nullptr};
};
TORCH_MODULE(CausalConv3d);

class PairEmbeddingImpl : public torch::nn::Module {
public:
    explicit PairEmbeddingImpl(int64_t channels);
    /// (N x 3 x H x W, N x 3 x H x W) -> N x channels x H x W.
    torch::Tensor forward(const torch::Tensor& current, const torch::Tensor& previous);

private:
    CausalConv3d conv1_{nullptr};
    CausalConv3d conv2_{nullptr};
};
TORCH_MODULE(PairEmbedding);

class TemporalBlockImpl : public torch::nn::Module {
public:
    explicit TemporalBlockImpl(int64_t channels);
    torch::Tensor forward(const torch::Tensor& planes);

private:
    CausalConv3d conv1_{nullptr};
    CausalConv3d conv2_{nullptr};
};
TORCH_MODULE(TemporalBlock);

/// Pre-norm multi-head self-attention over non-overlapping square windows
/// followed by a pointwise MLP, both residual. Partial windows are zero
/// padded and padded keys are masked out.
class WindowAttentionImpl : public torch::nn::Module {
public:
    WindowAttentionImpl(int64_t channels, int64_t heads, int64_t window);
    /// weights (optional): receives [windows * N, heads, L, L] attention.
    torch::Tensor forward(const torch::Tensor& x, torch::Tensor* weights = nullptr);

private:
    int64_t channels_, heads_, window_;
    torch::nn::LayerNorm norm1_{nullptr}, norm2_{nullptr};
    torch::nn::Linear qkv_{nullptr}, proj_{nullptr}, fc1_{nullptr}, fc2_{nullptr};
};
TORCH_MODULE(WindowAttention);

struct TwtOutput {
    torch::Tensor features;
    torch::Tensor flow;  // N x 2 x H x W
    torch::Tensor attention_first;
    torch::Tensor attention_second;
};

/// Attention, flow-guided deformable alignment of the previous half toward
/// the current half, attention again.
class TwtBlockImpl : public torch::nn::Module {
public:
    TwtBlockImpl(int64_t channels, int64_t heads, int64_t window, int64_t flow_channels, bool warp_enabled = true);

    /// base_flow (optional, may be undefined) is added to the predicted flow
    /// before sampling.
    TwtOutput forward(const torch::Tensor& x, const torch::Tensor& base_flow = {});

    bool warp_enabled() const noexcept { return warp_enabled_; }

private:
    int64_t channels_;
    bool warp_enabled_;
    WindowAttention attn1_{nullptr}, attn2_{nullptr};
    torch::nn::Conv2d flow1_{nullptr}, flow2_{nullptr};
    torch::nn::Conv2d offsets_{nullptr};
    torch::nn::Conv2d combine_{nullptr};
};
TORCH_MODULE(TwtBlock);

class MitigatorImpl : public torch::nn::Module {
public:
    explicit MitigatorImpl(MitigatorConfig config = {});

    const MitigatorConfig& config() const noexcept { return config_; }
    torch::Dtype dtype() const;

    torch::Tensor embed_pair(const torch::Tensor& current, const torch::Tensor& previous);
    /// Level embedding, or zeros when conditioning is disabled. level: [N].
    torch::Tensor level_embedding(const torch::Tensor& level);
    /// [full C, half 2C, quarter 4C].
    std::vector<torch::Tensor> encode(const torch::Tensor& features, const torch::Tensor& embedding);
    /// Coarse-to-fine per-scale alignment. Returns aligned features and the
    /// per-scale flows in the same [full, half, quarter] order.
    std::pair<std::vector<torch::Tensor>, std::vector<torch::Tensor>> align(const std::vector<torch::Tensor>& scales);
    /// Fusion, refinement blocks and residual decoding onto `input`.
    StepOutput refine_and_decode(const std::vector<torch::Tensor>& aligned, std::vector<torch::Tensor> scale_flows,
                                 const torch::Tensor& input);

    /// Full forward pass for one frame. Does not touch any state.
    StepOutput forward_step(const torch::Tensor& current, const torch::Tensor& previous, const torch::Tensor& level);
    StepOutput forward_step(const torch::Tensor& current, const torch::Tensor& previous, double level);

    TwtBlock scale_block(int s) { return scale_blocks_[static_cast<std::size_t>(s)]; }
    TwtBlock refinement_block(int i) { return refine_blocks_[static_cast<std::size_t>(i)]; }
    conditioning::CrossAttentionModulation modulation(int s) { return modulations_[static_cast<std::size_t>(s)]; }
    conditioning::LevelEmbedding level_mlp() { return level_mlp_; }

private:
    MitigatorConfig config_;
    PairEmbedding pair_{nullptr};
    conditioning::LevelEmbedding level_mlp_{nullptr};
    std::vector<TemporalBlock> blocks_;
    std::vector<CausalConv3d> downs_;
    std::vector<conditioning::CrossAttentionModulation> modulations_;
    std::vector<TwtBlock> scale_blocks_;
    std::vector<torch::nn::Conv2d> fuse_;
    std::vector<TwtBlock> refine_blocks_;
    torch::nn::Conv2d decode1_{nullptr}, decode2_{nullptr};
};
TORCH_MODULE(Mitigator);

}  // namespace turbrec::mitigator
