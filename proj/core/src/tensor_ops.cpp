#include "turbrec/tensor_ops.hpp"

namespace F = torch::nn::functional;

namespace turbrec::tensor {

torch::Tensor from_frame(const Frame& frame, torch::Dtype dtype) {
    auto hwc = torch::from_blob(const_cast<double*>(frame.data().data()),
                                {frame.height(), frame.width(), frame.channels()}, torch::kFloat64);
    return hwc.permute({2, 0, 1}).unsqueeze(0).to(dtype).contiguous();
}

torch::Tensor from_frames(const std::vector<Frame>& frames, torch::Dtype dtype) {
    std::vector<torch::Tensor> parts;
    parts.reserve(frames.size());
    for (const auto& f : frames) parts.push_back(from_frame(f, dtype));
    return torch::cat(parts, 0);
}

Frame to_frame(const torch::Tensor& t) {
    if (t.dim() != 4) throw ShapeError("to_frame expects an N x C x H x W tensor");
    const auto hwc = t[0].detach().to(torch::kCPU, torch::kFloat64).permute({1, 2, 0}).contiguous();
    Frame out(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), static_cast<int>(hwc.size(2)));
    std::copy_n(hwc.data_ptr<double>(), out.size(), out.data().begin());
    return out;
}

torch::Tensor from_plane(const Plane& plane, torch::Dtype dtype) {
    auto hw = torch::from_blob(const_cast<double*>(plane.data().data()), {plane.height(), plane.width()},
                               torch::kFloat64);
    return hw.view({1, 1, plane.height(), plane.width()}).to(dtype).clone();
}

Plane to_plane(const torch::Tensor& t) {
    const auto hw = t.detach().to(torch::kCPU, torch::kFloat64).reshape({t.size(-2), t.size(-1)}).contiguous();
    Plane out(static_cast<int>(hw.size(0)), static_cast<int>(hw.size(1)));
    std::copy_n(hw.data_ptr<double>(), out.size(), out.data().begin());
    return out;
}

torch::Tensor from_flow(const FlowField& flow, torch::Dtype dtype) {
    return torch::cat({from_plane(flow.u, dtype), from_plane(flow.v, dtype)}, 1);
}

FlowField to_flow(const torch::Tensor& t) {
    if (t.dim() != 4 || t.size(1) != 2) throw ShapeError("to_flow expects an N x 2 x H x W tensor");
    FlowField f;
    f.u = to_plane(t[0][0]);
    f.v = to_plane(t[0][1]);
    return f;
}

torch::Tensor warp(const torch::Tensor& img, const torch::Tensor& flow) {
    if (img.dim() != 4 || flow.dim() != 4 || flow.size(1) != 2 || img.size(0) != flow.size(0) ||
        img.size(2) != flow.size(2) || img.size(3) != flow.size(3)) {
        throw ShapeError("warp: image and flow shapes disagree");
    }
    const int64_t h = img.size(2);
    const int64_t w = img.size(3);
    const auto opts = flow.options();
    const auto xs = torch::arange(w, opts).view({1, 1, w}).expand({1, h, w});
    const auto ys = torch::arange(h, opts).view({1, h, 1}).expand({1, h, w});
    const auto px = xs + flow.select(1, 0);
    const auto py = ys + flow.select(1, 1);
    // align_corners=true maps -1/+1 to the outer pixel centres. A size-1 axis
    // has a single valid position, so its normalised coordinate is 0.
    const auto gx = w > 1 ? px * (2.0 / static_cast<double>(w - 1)) - 1.0 : px * 0.0;
    const auto gy = h > 1 ? py * (2.0 / static_cast<double>(h - 1)) - 1.0 : py * 0.0;
    const auto grid = torch::stack({gx, gy}, -1);
    return F::grid_sample(img, grid,
                          F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kBorder).align_corners(true));
}

namespace {

torch::Tensor pad_even(const torch::Tensor& img) {
    const int64_t ph = img.size(2) % 2;
    const int64_t pw = img.size(3) % 2;
    if (ph == 0 && pw == 0) return img;
    return F::pad(img, F::PadFuncOptions({0, pw, 0, ph}).mode(torch::kReplicate));
}

}  // namespace

torch::Tensor haar(const torch::Tensor& img) {
    const auto x = pad_even(img);
    const auto a = x.index({torch::indexing::Slice(), torch::indexing::Slice(), torch::indexing::Slice(0, torch::indexing::None, 2),
                            torch::indexing::Slice(0, torch::indexing::None, 2)});
    const auto b = x.index({torch::indexing::Slice(), torch::indexing::Slice(), torch::indexing::Slice(0, torch::indexing::None, 2),
                            torch::indexing::Slice(1, torch::indexing::None, 2)});
    const auto c = x.index({torch::indexing::Slice(), torch::indexing::Slice(), torch::indexing::Slice(1, torch::indexing::None, 2),
                            torch::indexing::Slice(0, torch::indexing::None, 2)});
    const auto d = x.index({torch::indexing::Slice(), torch::indexing::Slice(), torch::indexing::Slice(1, torch::indexing::None, 2),
                            torch::indexing::Slice(1, torch::indexing::None, 2)});
    const auto ll = 0.5 * (a + b + c + d);
    const auto lh = 0.5 * (a + b - c - d);
    const auto hl = 0.5 * (a - b + c - d);
    const auto hh = 0.5 * (a - b - c + d);
    return torch::cat({ll, lh, hl, hh}, 1);
}

torch::Tensor laplacian(const torch::Tensor& img) {
    const auto p = F::pad(img, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
    using torch::indexing::Slice;
    const int64_t h = img.size(2);
    const int64_t w = img.size(3);
    const auto centre = p.index({Slice(), Slice(), Slice(1, h + 1), Slice(1, w + 1)});
    const auto up = p.index({Slice(), Slice(), Slice(0, h), Slice(1, w + 1)});
    const auto down = p.index({Slice(), Slice(), Slice(2, h + 2), Slice(1, w + 1)});
    const auto left = p.index({Slice(), Slice(), Slice(1, h + 1), Slice(0, w)});
    const auto right = p.index({Slice(), Slice(), Slice(1, h + 1), Slice(2, w + 2)});
    return up + down + left + right - 4.0 * centre;
}

torch::Tensor resize_flow(const torch::Tensor& flow, int64_t h, int64_t w) {
    if (flow.size(2) == h && flow.size(3) == w) return flow;
    const double sy = static_cast<double>(h) / static_cast<double>(flow.size(2));
    const double sx = static_cast<double>(w) / static_cast<double>(flow.size(3));
    const auto r = F::interpolate(flow, F::InterpolateFuncOptions()
                                            .size(std::vector<int64_t>{h, w})
                                            .mode(torch::kBilinear)
                                            .align_corners(false));
    return torch::cat({r.narrow(1, 0, 1) * sx, r.narrow(1, 1, 1) * sy}, 1);
}

}  // namespace turbrec::tensor
