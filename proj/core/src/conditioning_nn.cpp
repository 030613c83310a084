#include "turbrec/conditioning_nn.hpp"

#include <cmath>

#include "turbrec/frame.hpp"

namespace turbrec::conditioning {

LevelEmbeddingImpl::LevelEmbeddingImpl(int64_t dim) : dim_(dim) {
    fc1_ = register_module("fc1", torch::nn::Linear(1, dim));
    fc2_ = register_module("fc2", torch::nn::Linear(dim, dim));
}

torch::Tensor LevelEmbeddingImpl::forward(const torch::Tensor& level) {
    auto x = level.dim() == 1 ? level.unsqueeze(1) : level;
    x = x.to(fc1_->weight.dtype());
    return fc2_(torch::gelu(fc1_(x)));
}

CrossAttentionModulationImpl::CrossAttentionModulationImpl(int64_t channels, int64_t embed_dim, int64_t key_dim)
    : channels_(channels), key_dim_(key_dim) {
    query_ = register_module("query", torch::nn::Linear(embed_dim, key_dim));
    query_to_channels_ = register_module("query_to_channels", torch::nn::Linear(embed_dim, channels));
    key_ = register_module("key", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, key_dim, 1)));
    value_ = register_module("value", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 1)));
    out_ = register_module("out", torch::nn::Linear(channels, channels));
}

ModulationResult CrossAttentionModulationImpl::forward(const torch::Tensor& features, const torch::Tensor& embedding) {
    if (features.dim() != 4 || features.size(1) != channels_) {
        throw ShapeError("modulate: expected N x " + std::to_string(channels_) + " x H x W features");
    }
    const int64_t n = features.size(0);
    const auto q = query_(embedding).view({n, 1, key_dim_});
    const auto k = key_(features).flatten(2);    // N x dk x HW
    const auto v = value_(features).flatten(2);  // N x C x HW
    const auto scores = torch::bmm(q, k).squeeze(1) / std::sqrt(static_cast<double>(key_dim_));
    const auto attn = torch::softmax(scores, -1);  // N x HW
    const auto context = torch::bmm(v, attn.unsqueeze(2)).squeeze(2);  // N x C
    const auto gain = torch::tanh(out_(query_to_channels_(embedding) + context));
    return {features * (1.0 + gain.view({n, channels_, 1, 1})), attn, gain};
}

}  // namespace turbrec::conditioning
