#pragma once

#include <torch/torch.h>

#include "turbrec/frame.hpp"

// Bridges between the plain containers and libtorch tensors, plus the
// differentiable counterparts of the fixed image operators. Tensors are NCHW.
namespace turbrec::tensor {

torch::Tensor from_frame(const Frame& frame, torch::Dtype dtype = torch::kFloat32);
torch::Tensor from_frames(const std::vector<Frame>& frames, torch::Dtype dtype = torch::kFloat32);
/// First batch element of an N x C x H x W tensor.
Frame to_frame(const torch::Tensor& t);

torch::Tensor from_plane(const Plane& plane, torch::Dtype dtype = torch::kFloat32);  // 1 x 1 x H x W
Plane to_plane(const torch::Tensor& t);

torch::Tensor from_flow(const FlowField& flow, torch::Dtype dtype = torch::kFloat32);  // 1 x 2 x H x W, (u, v)
FlowField to_flow(const torch::Tensor& t);

/// out(p) = img(p + flow(p)): bilinear, border-clamped, differentiable in
/// both arguments. Matches turbrec::warp on the plain containers.
torch::Tensor warp(const torch::Tensor& img, const torch::Tensor& flow);

/// Orthonormal Haar bands stacked along channels as [LL, LH, HL, HH], each
/// C channels at half resolution. Odd sizes are edge-replicated first.
torch::Tensor haar(const torch::Tensor& img);

/// 5-point Laplacian with edge replication.
torch::Tensor laplacian(const torch::Tensor& img);

/// Resize a flow field to (h, w) bilinearly, scaling displacements by the
/// size ratio.
torch::Tensor resize_flow(const torch::Tensor& flow, int64_t h, int64_t w);

}  // namespace turbrec::tensor
