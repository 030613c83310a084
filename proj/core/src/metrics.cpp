#include "turbrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "turbrec/image_ops.hpp"

namespace turbrec::eval {

double psnr(const Frame& output, const Frame& target, double peak) {
    require_same_shape(output, target, "psnr");
    double mse = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) {
        const double d = output.data()[i] - target.data()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(output.size());
    if (mse == 0.0) return kInfinitePsnr;
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

// Valid-mode separable filtering of a plane.
Plane filter_valid(const Plane& p, const std::vector<double>& k) {
    const int r = static_cast<int>(k.size()) / 2;
    const int h = p.height(), w = p.width();
    const int oh = h - 2 * r, ow = w - 2 * r;
    Plane rows(h, ow);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < static_cast<int>(k.size()); ++i) s += k[i] * p.at(y, x + i);
            rows.at(y, x) = s;
        }
    }
    Plane out(oh, ow);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < static_cast<int>(k.size()); ++i) s += k[i] * rows.at(y + i, x);
            out.at(y, x) = s;
        }
    }
    return out;
}

Plane product(const Plane& a, const Plane& b) {
    Plane out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
    return out;
}

}  // namespace

double ssim(const Frame& output, const Frame& target) {
    require_same_shape(output, target, "ssim");
    const Plane x = to_gray(output);
    const Plane y = to_gray(target);
    const int radius = std::min(5, (std::min(x.height(), x.width()) - 1) / 2);
    const auto k = gaussian_kernel(1.5, radius);
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;

    const Plane mx = filter_valid(x, k);
    const Plane my = filter_valid(y, k);
    const Plane sxx = filter_valid(product(x, x), k);
    const Plane syy = filter_valid(product(y, y), k);
    const Plane sxy = filter_valid(product(x, y), k);
    double total = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double ux = mx.data()[i], uy = my.data()[i];
        const double vx = sxx.data()[i] - ux * ux;
        const double vy = syy.data()[i] - uy * uy;
        const double cxy = sxy.data()[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

namespace {

void require_same_length(const VideoSequence& a, const VideoSequence& b, const char* what) {
    if (a.length() != b.length()) throw ShapeError(std::string(what) + ": sequence lengths differ");
    if (a.length() == 0) throw ShapeError(std::string(what) + ": empty sequence");
}

}  // namespace

double mean_psnr(const VideoSequence& output, const VideoSequence& target) {
    require_same_length(output, target, "mean_psnr");
    double s = 0.0;
    for (std::size_t t = 0; t < output.length(); ++t) s += psnr(output.frames[t], target.frames[t]);
    return s / static_cast<double>(output.length());
}

double mean_ssim(const VideoSequence& output, const VideoSequence& target) {
    require_same_length(output, target, "mean_ssim");
    double s = 0.0;
    for (std::size_t t = 0; t < output.length(); ++t) s += ssim(output.frames[t], target.frames[t]);
    return s / static_cast<double>(output.length());
}

double l1_distance(const Frame& a, const Frame& b) {
    require_same_shape(a, b, "l1_distance");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
    return s / static_cast<double>(a.size());
}

namespace {

Frame difference(const Frame& a, const Frame& b) {
    Frame d(a.height(), a.width(), a.channels());
    for (std::size_t i = 0; i < a.size(); ++i) d.data()[i] = a.data()[i] - b.data()[i];
    return d;
}

}  // namespace

double temporal_perceptual(const VideoSequence& output, const VideoSequence& target, const TemporalDistance& dist) {
    if (output.length() != target.length()) throw ShapeError("temporal_perceptual: sequence lengths differ");
    if (output.length() < 2) throw std::invalid_argument("temporal_perceptual needs at least two frames");
    double s = 0.0;
    for (std::size_t t = 1; t < output.length(); ++t) {
        require_same_shape(output.frames[t], target.frames[t], "temporal_perceptual");
        s += dist(difference(output.frames[t], output.frames[t - 1]), difference(target.frames[t], target.frames[t - 1]));
    }
    return s / static_cast<double>(output.length() - 1);
}

Frame yt_plane(const VideoSequence& video, int x_column) {
    video.validate();
    const Frame& first = video.frames.front();
    if (x_column < 0 || x_column >= first.width()) throw std::out_of_range("yt_plane: column out of range");
    const int t_count = static_cast<int>(video.length());
    Frame out(first.height(), t_count, first.channels());
    for (int t = 0; t < t_count; ++t) {
        const Frame& f = video.frames[static_cast<std::size_t>(t)];
        for (int y = 0; y < first.height(); ++y) {
            for (int c = 0; c < first.channels(); ++c) out.at(y, t, c) = f.at(y, x_column, c);
        }
    }
    return out;
}

double column_total_variation(const Frame& image) {
    if (image.width() < 2) return 0.0;
    double s = 0.0;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 1; x < image.width(); ++x) {
            for (int c = 0; c < image.channels(); ++c) s += std::abs(image.at(y, x, c) - image.at(y, x - 1, c));
        }
    }
    return s / (static_cast<double>(image.height()) * (image.width() - 1) * image.channels());
}

}  // namespace turbrec::eval
