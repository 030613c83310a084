#include "turbrec/losses.hpp"

#include <stdexcept>

#include "turbrec/frame.hpp"
#include "turbrec/tensor_ops.hpp"

namespace turbrec::losses {

void LossConfig::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (lambda_dwt < 0.0 || lambda_lap < 0.0 || lambda_temp < 0.0 || lambda_flow < 0.0) {
        throw std::invalid_argument("loss weights must be >= 0");
    }
    for (int k : flow_offsets) {
        if (k < 1) throw std::invalid_argument("flow offsets must be >= 1");
    }
    if (mask_delta <= 0.0) throw std::invalid_argument("mask_delta must be > 0");
}

namespace {

void require_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (!a.sizes().equals(b.sizes())) throw ShapeError(std::string(what) + ": shapes differ");
}

}  // namespace

torch::Tensor charbonnier(const torch::Tensor& o, const torch::Tensor& t, double epsilon) {
    require_same(o, t, "charbonnier");
    const auto d = o - t;
    return torch::sqrt(d * d + epsilon * epsilon).mean();
}

torch::Tensor dwt_loss(const torch::Tensor& o, const torch::Tensor& t) {
    require_same(o, t, "dwt_loss");
    return (tensor::haar(o) - tensor::haar(t)).abs().mean();
}

torch::Tensor laplacian_loss(const torch::Tensor& o, const torch::Tensor& t) {
    require_same(o, t, "laplacian_loss");
    return (tensor::laplacian(o) - tensor::laplacian(t)).abs().mean();
}

torch::Tensor temporal_static_loss(const torch::Tensor& o_t, const torch::Tensor& o_prev, const torch::Tensor& flow,
                                   const torch::Tensor& static_mask, double delta) {
    require_same(o_t, o_prev, "temporal_static_loss");
    if (static_mask.dim() != 4 || static_mask.size(2) != o_t.size(2) || static_mask.size(3) != o_t.size(3)) {
        throw ShapeError("temporal_static_loss: mask shape differs");
    }
    const auto s = static_mask.detach();
    const auto warped = tensor::warp(o_prev, flow.detach());
    const auto weighted = (s * (o_t - warped).abs()).mean();
    return weighted / (s.mean() + delta);
}

FlowLossResult multistep_flow_loss(const torch::Tensor& o_t, const std::vector<torch::Tensor>& history,
                                   const std::vector<torch::Tensor>& flows, const std::vector<int>& offsets,
                                   double epsilon) {
    FlowLossResult r;
    torch::Tensor sum = torch::zeros({}, o_t.options());
    for (int k : offsets) {
        const auto idx = static_cast<std::size_t>(k - 1);
        if (idx >= history.size() || idx >= flows.size() || !history[idx].defined() || !flows[idx].defined()) continue;
        sum = sum + charbonnier(o_t, tensor::warp(history[idx], flows[idx]), epsilon);
        ++r.used_offsets;
    }
    r.skipped = r.used_offsets == 0;
    r.value = r.skipped ? sum : sum / static_cast<double>(r.used_offsets);
    return r;
}

double LossReport::recomputed_total(const LossConfig& c) const {
    return rec + c.lambda_dwt * dwt + c.lambda_lap * lap + c.lambda_temp * temp + c.lambda_flow * flow;
}

LossReport total_loss(const LossInputs& in, const LossConfig& config) {
    config.validate();
    LossReport r;
    const auto rec = charbonnier(in.output, in.target, config.epsilon);
    const auto dwt = dwt_loss(in.output, in.target);
    const auto lap = laplacian_loss(in.output, in.target);
    auto total = rec + config.lambda_dwt * dwt + config.lambda_lap * lap;
    r.rec = rec.item<double>();
    r.dwt = dwt.item<double>();
    r.lap = lap.item<double>();

    if (in.prev_output.defined() && in.static_mask.defined() && in.flow.defined()) {
        const auto temp = temporal_static_loss(in.output, in.prev_output, in.flow, in.static_mask, config.mask_delta);
        total = total + config.lambda_temp * temp;
        r.temp = temp.item<double>();
    }
    const auto fl = multistep_flow_loss(in.output, in.history, in.history_flows, config.flow_offsets, config.epsilon);
    r.flow_skipped = fl.skipped;
    if (!fl.skipped) {
        total = total + config.lambda_flow * fl.value;
        r.flow = fl.value.item<double>();
    }
    r.total = total;
    r.total_value = total.item<double>();
    return r;
}

}  // namespace turbrec::losses
