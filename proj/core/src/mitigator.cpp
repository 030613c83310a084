#include "turbrec/mitigator.hpp"

#include <cmath>
#include <stdexcept>

#include "turbrec/tensor_ops.hpp"

namespace F = torch::nn::functional;
using torch::indexing::Slice;

namespace turbrec::mitigator {

void MitigatorConfig::validate() const {
    if (scales != 3) throw std::invalid_argument("mitigator uses exactly three scales");
    if (base_channels < 2 || base_channels % 2 != 0) throw std::invalid_argument("base_channels must be even");
    if (twt_heads < 1 || base_channels % twt_heads != 0) {
        throw std::invalid_argument("base_channels must be divisible by twt_heads");
    }
    if (twt_window < 1) throw std::invalid_argument("twt_window must be >= 1");
    if (flow_channels < 1) throw std::invalid_argument("flow_channels must be >= 1");
    if (refinement_blocks < 0) throw std::invalid_argument("refinement_blocks must be >= 0");
    if (embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");
}

RecurrentState RecurrentState::initial(const torch::Tensor& first_frame, std::size_t capacity) {
    RecurrentState s;
    s.prev_output = first_frame;
    s.capacity = capacity;
    return s;
}

void RecurrentState::push(const torch::Tensor& output, const torch::Tensor& flow) {
    if (capacity == 0) return;
    buffer.emplace_front(output, flow);
    while (buffer.size() > capacity) buffer.pop_back();
}

void RecurrentState::detach() {
    if (prev_output.defined()) prev_output = prev_output.detach();
    for (auto& [o, f] : buffer) {
        o = o.detach();
        if (f.defined()) f = f.detach();
    }
}

std::vector<torch::Tensor> compose_flows(const torch::Tensor& current, const std::vector<torch::Tensor>& past,
                                         std::size_t max_offset) {
    std::vector<torch::Tensor> out{current};
    if (max_offset <= 1 || past.empty()) return out;
    const std::vector<torch::Tensor> older(past.begin() + 1, past.end());
    for (const auto& f : compose_flows(past.front(), older, max_offset - 1)) {
        out.push_back(current + tensor::warp(f, current));
    }
    return out;
}

torch::Tensor to_volume(const torch::Tensor& planes) {
    const auto n = planes.size(0);
    const auto c = planes.size(1);
    if (c % 2 != 0) throw ShapeError("to_volume: channel count must be even");
    return planes.view({n, 2, c / 2, planes.size(2), planes.size(3)}).permute({0, 2, 1, 3, 4});
}

torch::Tensor to_planes(const torch::Tensor& volume) {
    const auto n = volume.size(0);
    const auto c = volume.size(1);
    return volume.permute({0, 2, 1, 3, 4}).reshape({n, 2 * c, volume.size(3), volume.size(4)});
}

CausalConv3dImpl::CausalConv3dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride) {
    conv_ = register_module("conv", torch::nn::Conv3d(torch::nn::Conv3dOptions(in, out, {2, kernel, kernel})
                                                          .stride({1, stride, stride})
                                                          .padding({0, kernel / 2, kernel / 2})));
}

torch::Tensor CausalConv3dImpl::forward(const torch::Tensor& volume) {
    return conv_(F::pad(volume, F::PadFuncOptions({0, 0, 0, 0, 1, 0})));
}

PairEmbeddingImpl::PairEmbeddingImpl(int64_t channels) {
    conv1_ = register_module("conv1", CausalConv3d(3, channels / 2));
    conv2_ = register_module("conv2", CausalConv3d(channels / 2, channels / 2));
}

torch::Tensor PairEmbeddingImpl::forward(const torch::Tensor& current, const torch::Tensor& previous) {
    if (!current.sizes().equals(previous.sizes())) throw ShapeError("embed_pair: frame shapes differ");
    if (current.dim() != 4 || current.size(1) != 3) throw ShapeError("embed_pair: expected N x 3 x H x W frames");
    const auto volume = torch::stack({previous, current}, 2);
    return to_planes(conv2_(torch::gelu(conv1_(volume))));
}

TemporalBlockImpl::TemporalBlockImpl(int64_t channels) {
    conv1_ = register_module("conv1", CausalConv3d(channels / 2, channels / 2));
    conv2_ = register_module("conv2", CausalConv3d(channels / 2, channels / 2));
}

torch::Tensor TemporalBlockImpl::forward(const torch::Tensor& planes) {
    const auto v = to_volume(planes);
    return to_planes(v + conv2_(torch::gelu(conv1_(v))));
}

WindowAttentionImpl::WindowAttentionImpl(int64_t channels, int64_t heads, int64_t window)
    : channels_(channels), heads_(heads), window_(window) {
    if (channels % heads != 0) throw std::invalid_argument("channels must be divisible by heads");
    norm1_ = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
    norm2_ = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
    qkv_ = register_module("qkv", torch::nn::Linear(channels, 3 * channels));
    proj_ = register_module("proj", torch::nn::Linear(channels, channels));
    fc1_ = register_module("fc1", torch::nn::Linear(channels, 2 * channels));
    fc2_ = register_module("fc2", torch::nn::Linear(2 * channels, channels));
}

torch::Tensor WindowAttentionImpl::forward(const torch::Tensor& x, torch::Tensor* weights) {
    const int64_t n = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
    if (c != channels_) throw ShapeError("window attention: channel mismatch");
    const int64_t ws = window_;
    const int64_t hp = (h + ws - 1) / ws * ws;
    const int64_t wp = (w + ws - 1) / ws * ws;
    const int64_t nh = hp / ws, nw = wp / ws, len = ws * ws;

    const auto xp = F::pad(x, F::PadFuncOptions({0, wp - w, 0, hp - h}));
    auto tokens = xp.view({n, c, nh, ws, nw, ws}).permute({0, 2, 4, 3, 5, 1}).reshape({n * nh * nw, len, c});

    auto valid = torch::ones({1, 1, h, w}, torch::TensorOptions().dtype(torch::kBool));
    valid = F::pad(valid.to(torch::kFloat32), F::PadFuncOptions({0, wp - w, 0, hp - h})).to(torch::kBool);
    valid = valid.view({1, nh, ws, nw, ws}).permute({0, 1, 3, 2, 4}).reshape({nh * nw, len});
    valid = valid.repeat({n, 1}).view({n * nh * nw, 1, 1, len});

    const int64_t hd = c / heads_;
    const auto qkv = qkv_(norm1_(tokens)).view({n * nh * nw, len, 3, heads_, hd}).permute({2, 0, 3, 1, 4});
    const auto q = qkv[0], k = qkv[1], v = qkv[2];
    auto scores = torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd));
    scores = scores.masked_fill(valid.logical_not(), -std::numeric_limits<double>::infinity());
    const auto attn = torch::softmax(scores, -1);
    if (weights != nullptr) *weights = attn;
    const auto mixed = torch::matmul(attn, v).transpose(1, 2).reshape({n * nh * nw, len, c});
    tokens = tokens + proj_(mixed);
    tokens = tokens + fc2_(torch::gelu(fc1_(norm2_(tokens))));

    const auto out = tokens.view({n, nh, nw, ws, ws, c}).permute({0, 5, 1, 3, 2, 4}).reshape({n, c, hp, wp});
    return out.index({Slice(), Slice(), Slice(0, h), Slice(0, w)});
}

TwtBlockImpl::TwtBlockImpl(int64_t channels, int64_t heads, int64_t window, int64_t flow_channels, bool warp_enabled)
    : channels_(channels), warp_enabled_(warp_enabled) {
    attn1_ = register_module("attn1", WindowAttention(channels, heads, window));
    attn2_ = register_module("attn2", WindowAttention(channels, heads, window));
    flow1_ = register_module("flow1", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, flow_channels, 3).padding(1)));
    flow2_ = register_module("flow2", torch::nn::Conv2d(torch::nn::Conv2dOptions(flow_channels, 2, 3).padding(1)));
    offsets_ = register_module("offsets", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, 18, 3).padding(1)));
    const int64_t half = channels / 2;
    combine_ = register_module("combine", torch::nn::Conv2d(torch::nn::Conv2dOptions(9 * half, half, 1)));

    torch::NoGradGuard guard;
    flow2_->weight.zero_();
    flow2_->bias.zero_();
    offsets_->weight.zero_();
    offsets_->bias.zero_();
    // Identity on the centre tap: the initial alignment is a pure flow warp.
    combine_->weight.zero_();
    combine_->bias.zero_();
    for (int64_t o = 0; o < half; ++o) combine_->weight[o][4 * half + o][0][0] = 1.0;
}

TwtOutput TwtBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& base_flow) {
    if (x.dim() != 4 || x.size(1) != channels_) throw ShapeError("twt_block: channel mismatch");
    TwtOutput out;
    const auto x1 = attn1_(x, &out.attention_first);
    const int64_t half = channels_ / 2;
    const auto prev = x1.narrow(1, 0, half);
    const auto cur = x1.narrow(1, half, half);

    torch::Tensor flow = flow2_(torch::gelu(flow1_(x1)));
    torch::Tensor offsets = offsets_(x1);
    if (base_flow.defined()) flow = flow + base_flow;
    if (!warp_enabled_) {
        flow = torch::zeros_like(flow);
        offsets = torch::zeros_like(offsets);
    }

    std::vector<torch::Tensor> taps;
    taps.reserve(9);
    for (int64_t k = 0; k < 9; ++k) {
        const double dx = static_cast<double>(k % 3 - 1);
        const double dy = static_cast<double>(k / 3 - 1);
        const auto tap = torch::stack({flow.select(1, 0) + dx, flow.select(1, 1) + dy}, 1);
        taps.push_back(tensor::warp(prev, tap + offsets.narrow(1, 2 * k, 2)));
    }
    const auto aligned = combine_(torch::cat(taps, 1));
    out.features = attn2_(torch::cat({aligned, cur}, 1), &out.attention_second);
    out.flow = flow;
    return out;
}

MitigatorImpl::MitigatorImpl(MitigatorConfig config) : config_(config) {
    config_.validate();
    const int64_t c = config_.base_channels;
    pair_ = register_module("pair", PairEmbedding(c));
    level_mlp_ = register_module("level", conditioning::LevelEmbedding(config_.embed_dim));
    for (int s = 0; s < config_.scales; ++s) {
        const int64_t cs = c << s;
        const auto tag = std::to_string(s);
        if (s > 0) downs_.push_back(register_module("down" + tag, CausalConv3d(cs / 4, cs / 2, 3, 2)));
        blocks_.push_back(register_module("block" + tag, TemporalBlock(cs)));
        modulations_.push_back(
            register_module("modulate" + tag, conditioning::CrossAttentionModulation(cs, config_.embed_dim)));
        scale_blocks_.push_back(register_module(
            "twt" + tag,
            TwtBlock(cs, config_.twt_heads, config_.twt_window, config_.flow_channels, config_.multiscale_warp)));
    }
    // fuse_[s] merges scale s with the upsampled result from scale s + 1.
    for (int s = 0; s + 1 < config_.scales; ++s) {
        const int64_t cs = c << s;
        fuse_.push_back(register_module("fuse" + std::to_string(s),
                                        torch::nn::Conv2d(torch::nn::Conv2dOptions(3 * cs, cs, 3).padding(1))));
    }
    for (int i = 0; i < config_.refinement_blocks; ++i) {
        refine_blocks_.push_back(register_module(
            "refine" + std::to_string(i),
            TwtBlock(c, config_.twt_heads, config_.twt_window, config_.flow_channels, config_.multiscale_warp)));
    }
    decode1_ = register_module("decode1", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, c, 3).padding(1)));
    decode2_ = register_module("decode2", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 3, 3).padding(1)));
    torch::NoGradGuard guard;
    decode2_->weight.zero_();
    decode2_->bias.zero_();
}

torch::Dtype MitigatorImpl::dtype() const { return decode2_->weight.scalar_type(); }

torch::Tensor MitigatorImpl::embed_pair(const torch::Tensor& current, const torch::Tensor& previous) {
    return pair_(current.to(dtype()), previous.to(dtype()));
}

torch::Tensor MitigatorImpl::level_embedding(const torch::Tensor& level) {
    const auto lv = level.to(dtype()).reshape({-1});
    if (!config_.conditioning) return torch::zeros({lv.size(0), config_.embed_dim}, lv.options());
    return level_mlp_(lv);
}

std::vector<torch::Tensor> MitigatorImpl::encode(const torch::Tensor& features, const torch::Tensor& embedding) {
    std::vector<torch::Tensor> out;
    torch::Tensor x = features;
    for (int s = 0; s < config_.scales; ++s) {
        if (s > 0) x = to_planes(downs_[static_cast<std::size_t>(s - 1)](to_volume(x)));
        x = blocks_[static_cast<std::size_t>(s)](x);
        x = modulations_[static_cast<std::size_t>(s)](x, embedding).features;
        out.push_back(x);
    }
    return out;
}

std::pair<std::vector<torch::Tensor>, std::vector<torch::Tensor>> MitigatorImpl::align(
    const std::vector<torch::Tensor>& scales) {
    const auto n = scales.size();
    std::vector<torch::Tensor> aligned(n), flows(n);
    for (std::size_t i = n; i-- > 0;) {
        const auto& f = scales[i];
        const torch::Tensor base =
            i + 1 < n ? tensor::resize_flow(flows[i + 1], f.size(2), f.size(3)) : torch::Tensor();
        auto r = scale_blocks_[i](f, base);
        aligned[i] = r.features;
        flows[i] = r.flow;
    }
    return {aligned, flows};
}

StepOutput MitigatorImpl::refine_and_decode(const std::vector<torch::Tensor>& aligned,
                                            std::vector<torch::Tensor> scale_flows, const torch::Tensor& input) {
    torch::Tensor g = aligned.back();
    for (std::size_t s = aligned.size() - 1; s-- > 0;) {
        const auto& f = aligned[s];
        const auto up = F::interpolate(g, F::InterpolateFuncOptions()
                                              .size(std::vector<int64_t>{f.size(2), f.size(3)})
                                              .mode(torch::kBilinear)
                                              .align_corners(false));
        g = torch::gelu(fuse_[s](torch::cat({f, up}, 1)));
    }
    StepOutput out;
    torch::Tensor final_flow = scale_flows.empty() ? torch::zeros({g.size(0), 2, g.size(2), g.size(3)}, g.options())
                                                   : scale_flows.front();
    for (auto& block : refine_blocks_) {
        auto r = block(g);
        g = r.features;
        final_flow = final_flow + r.flow;
        out.flows.refinement_flows.push_back(r.flow);
    }
    out.residual = decode2_(torch::gelu(decode1_(g)));
    out.o_hat = (input + out.residual.to(input.scalar_type())).clamp(0.0, 1.0);
    out.flows.scale_flows = std::move(scale_flows);
    out.flows.final_flow = final_flow;
    return out;
}

StepOutput MitigatorImpl::forward_step(const torch::Tensor& current, const torch::Tensor& previous,
                                       const torch::Tensor& level) {
    const auto features = embed_pair(current, previous);
    const auto scales = encode(features, level_embedding(level));
    auto [aligned, flows] = align(scales);
    return refine_and_decode(aligned, std::move(flows), current);
}

StepOutput MitigatorImpl::forward_step(const torch::Tensor& current, const torch::Tensor& previous, double level) {
    return forward_step(current, previous, torch::full({current.size(0)}, level, torch::TensorOptions().dtype(dtype())));
}

}  // namespace turbrec::mitigator
