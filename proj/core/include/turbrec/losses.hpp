#pragma once

#include <torch/torch.h>
#include <vector>

// Training objectives on N x C x H x W tensors. All reductions are means.
namespace turbrec::losses {

struct LossConfig {
    double epsilon = 1e-3;
    double lambda_dwt = 0.1;
    double lambda_lap = 0.1;
    double lambda_temp = 0.05;
    double lambda_flow = 0.05;
    std::vector<int> flow_offsets{1, 2};
    double mask_delta = 1e-6;  // added to mean(S) in the temporal term

    void validate() const;
};

/// mean(sqrt((o - t)^2 + eps^2)).
torch::Tensor charbonnier(const torch::Tensor& o, const torch::Tensor& t, double epsilon);

/// Mean absolute difference over the four orthonormal Haar subbands.
torch::Tensor dwt_loss(const torch::Tensor& o, const torch::Tensor& t);

/// Mean absolute difference of the 5-point Laplacian responses.
torch::Tensor laplacian_loss(const torch::Tensor& o, const torch::Tensor& t);

/// mean(S * |O_t - warp(O_prev, flow)|) / (mean(S) + delta). S and flow are
/// detached: the loss cannot shrink the mask or move the flow.
torch::Tensor temporal_static_loss(const torch::Tensor& o_t, const torch::Tensor& o_prev, const torch::Tensor& flow,
                                   const torch::Tensor& static_mask, double delta = 1e-6);

struct FlowLossResult {
    torch::Tensor value;
    bool skipped = false;  // no offset had history available
    int used_offsets = 0;
};

/// history[k-1] = O_{t-k}; flows[k-1] = F_t^(k). Offsets without history or
/// flow are skipped; the result averages Charbonnier(O_t, warp(O_{t-k},
/// F_t^(k))) over the remaining ones.
FlowLossResult multistep_flow_loss(const torch::Tensor& o_t, const std::vector<torch::Tensor>& history,
                                   const std::vector<torch::Tensor>& flows, const std::vector<int>& offsets,
                                   double epsilon);

struct LossInputs {
    torch::Tensor output;        // O_t
    torch::Tensor target;        // T_t
    torch::Tensor prev_output;   // O_{t-1}; undefined at t = 0
    torch::Tensor flow;          // F_t^(1)
    torch::Tensor static_mask;   // S_t, N x 1 x H x W; undefined disables the temporal term
    std::vector<torch::Tensor> history;      // O_{t-k}, k = 1..
    std::vector<torch::Tensor> history_flows;  // F_t^(k), k = 1..
};

struct LossReport {
    torch::Tensor total;  // differentiable
    double rec = 0.0;
    double dwt = 0.0;
    double lap = 0.0;
    double temp = 0.0;
    double flow = 0.0;
    double total_value = 0.0;
    bool flow_skipped = false;

    /// rec + sum of lambda-weighted terms from the stored scalars.
    double recomputed_total(const LossConfig& config) const;
};

LossReport total_loss(const LossInputs& in, const LossConfig& config);

}  // namespace turbrec::losses
