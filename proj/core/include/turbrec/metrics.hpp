#pragma once

#include <functional>
#include <limits>

#include "turbrec/frame.hpp"

namespace turbrec::eval {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE); identical inputs give +infinity.
double psnr(const Frame& output, const Frame& target, double peak = 1.0);

/// Windowed SSIM on luma: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, data range 1, mean over all fully contained windows. Frames
/// smaller than the window shrink it to fit.
double ssim(const Frame& output, const Frame& target);

/// Clip means of the per-frame metrics.
double mean_psnr(const VideoSequence& output, const VideoSequence& target);
double mean_ssim(const VideoSequence& output, const VideoSequence& target);

/// Distance between two temporal difference images.
using TemporalDistance = std::function<double(const Frame& output_diff, const Frame& target_diff)>;

/// Mean absolute difference.
double l1_distance(const Frame& a, const Frame& b);

/// Mean over t >= 1 of dist(O_t - O_{t-1}, T_t - T_{t-1}).
double temporal_perceptual(const VideoSequence& output, const VideoSequence& target,
                           const TemporalDistance& dist = l1_distance);

/// (H, T, C) image whose column t is column x of frame t.
Frame yt_plane(const VideoSequence& video, int x_column);

/// Mean absolute difference between horizontally adjacent columns.
double column_total_variation(const Frame& image);

}  // namespace turbrec::eval
