#pragma once

#include <torch/torch.h>

namespace turbrec::conditioning {

/// Lifts the scalar turbulence level to a D-dimensional embedding:
/// Linear(1, D) -> GELU -> Linear(D, D).
class LevelEmbeddingImpl : public torch::nn::Module {
public:
    explicit LevelEmbeddingImpl(int64_t dim = 64);

    /// level: shape [N] or [N, 1], values in [0, 1]. Returns [N, D].
    torch::Tensor forward(const torch::Tensor& level);
    int64_t dim() const noexcept { return dim_; }

private:
    int64_t dim_;
    torch::nn::Linear fc1_{nullptr};
    torch::nn::Linear fc2_{nullptr};
};
TORCH_MODULE(LevelEmbedding);

struct ModulationResult {
    torch::Tensor features;  // same shape as the input features
    torch::Tensor attention; // [N, H*W], softmax over spatial positions
    torch::Tensor gain;      // [N, C], per-channel multiplier minus one
};

/// Single-query cross-attention: the embedding is the query, 1x1
/// projections of the features are keys and values. The attended context
/// plus the projected query gives a per-channel gain in (0, 2):
/// out = f * (1 + tanh(W_o (W_z emb + context))).
class CrossAttentionModulationImpl : public torch::nn::Module {
public:
    CrossAttentionModulationImpl(int64_t channels, int64_t embed_dim, int64_t key_dim = 16);

    ModulationResult forward(const torch::Tensor& features, const torch::Tensor& embedding);

private:
    int64_t channels_;
    int64_t key_dim_;
    torch::nn::Linear query_{nullptr};
    torch::nn::Linear query_to_channels_{nullptr};
    torch::nn::Conv2d key_{nullptr};
    torch::nn::Conv2d value_{nullptr};
    torch::nn::Linear out_{nullptr};
};
TORCH_MODULE(CrossAttentionModulation);

}  // namespace turbrec::conditioning
