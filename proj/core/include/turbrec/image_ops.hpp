#pragma once

#include <vector>

#include "turbrec/frame.hpp"

namespace turbrec {

enum class WarpMode { bilinear };

/// Backward warp: out(p) = frame(p + flow(p)), bilinear, coordinates clamped
/// to the frame border.
Frame warp(const Frame& frame, const FlowField& flow, WarpMode mode = WarpMode::bilinear);
Plane warp(const Plane& plane, const FlowField& flow);

/// Bilinear sample of channel c at real coordinates, border-clamped.
double sample_bilinear(const Frame& frame, double x, double y, int c);
double sample_bilinear(const Plane& plane, double x, double y);

/// [full, half, quarter, ...] by 2x2 area averaging. Odd sizes are padded by
/// edge replication first, so level i is ceil(H / 2^i) x ceil(W / 2^i).
std::vector<Frame> build_pyramid(const Frame& frame, int levels = 3);
Frame downsample_area(const Frame& frame);

/// Orthonormal single-level Haar decomposition (filters 1/sqrt(2)).
///
/// For a 2x2 block [[a, b], [c, d]]:
///   LL = (a + b + c + d) / 2    LH = (a + b - c - d) / 2
///   HL = (a - b + c - d) / 2    HH = (a - b - c + d) / 2
struct HaarBands {
    Frame ll, lh, hl, hh;
    int source_height = 0;
    int source_width = 0;
    bool padded_rows = false;  // odd height replicated before transform
    bool padded_cols = false;
};

HaarBands haar_dwt(const Frame& frame);
Frame haar_idwt(const HaarBands& bands);

/// 3x3 Laplacian [[0,1,0],[1,-4,1],[0,1,0]] per channel, edge-replicated.
Frame laplacian(const Frame& frame);

/// Separable Gaussian blur with edge replication. sigma <= 0 returns a copy.
Frame gaussian_blur(const Frame& frame, double sigma);
Plane gaussian_blur(const Plane& plane, double sigma);
std::vector<double> gaussian_kernel(double sigma, int radius = -1);

/// Rec.601 luma for RGB, identity for grayscale.
Plane to_gray(const Frame& frame);
Frame gray_frame(const Plane& plane);

/// Central-difference gradient magnitude.
Plane gradient_magnitude(const Plane& plane);

Frame crop(const Frame& frame, int x0, int y0, int width, int height);
Frame resize_bilinear(const Frame& frame, int height, int width);
Frame clamp01(Frame frame);

double percentile(std::vector<double> values, double q);

}  // namespace turbrec
