#include "turbrec/image_ops.hpp"

#include <algorithm>
#include <cmath>

namespace turbrec {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

struct BilinearTap {
    int x0, x1, y0, y1;
    double fx, fy;
};

inline BilinearTap bilinear_tap(double x, double y, int width, int height) {
    x = std::clamp(x, 0.0, static_cast<double>(width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height - 1));
    BilinearTap t{};
    t.x0 = static_cast<int>(std::floor(x));
    t.y0 = static_cast<int>(std::floor(y));
    t.x1 = std::min(t.x0 + 1, width - 1);
    t.y1 = std::min(t.y0 + 1, height - 1);
    t.fx = x - t.x0;
    t.fy = y - t.y0;
    return t;
}

// Pads odd dimensions by replicating the last row/column.
Frame pad_even(const Frame& frame) {
    const int h = frame.height() + (frame.height() % 2);
    const int w = frame.width() + (frame.width() % 2);
    if (h == frame.height() && w == frame.width()) return frame;
    Frame out(h, w, frame.channels());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < frame.channels(); ++c) {
                out.at(y, x, c) = frame.at(std::min(y, frame.height() - 1),
                                           std::min(x, frame.width() - 1), c);
            }
        }
    }
    return out;
}

}  // namespace

double sample_bilinear(const Frame& frame, double x, double y, int c) {
    const auto t = bilinear_tap(x, y, frame.width(), frame.height());
    const double top = (1.0 - t.fx) * frame.at(t.y0, t.x0, c) + t.fx * frame.at(t.y0, t.x1, c);
    const double bot = (1.0 - t.fx) * frame.at(t.y1, t.x0, c) + t.fx * frame.at(t.y1, t.x1, c);
    return (1.0 - t.fy) * top + t.fy * bot;
}

double sample_bilinear(const Plane& plane, double x, double y) {
    const auto t = bilinear_tap(x, y, plane.width(), plane.height());
    const double top = (1.0 - t.fx) * plane.at(t.y0, t.x0) + t.fx * plane.at(t.y0, t.x1);
    const double bot = (1.0 - t.fx) * plane.at(t.y1, t.x0) + t.fx * plane.at(t.y1, t.x1);
    return (1.0 - t.fy) * top + t.fy * bot;
}

Frame warp(const Frame& frame, const FlowField& flow, WarpMode) {
    require_same_shape(frame, flow, "warp");
    Frame out(frame.height(), frame.width(), frame.channels());
    for (int y = 0; y < frame.height(); ++y) {
        for (int x = 0; x < frame.width(); ++x) {
            const double sx = x + flow.u.at(y, x);
            const double sy = y + flow.v.at(y, x);
            for (int c = 0; c < frame.channels(); ++c) {
                out.at(y, x, c) = sample_bilinear(frame, sx, sy, c);
            }
        }
    }
    return out;
}

Plane warp(const Plane& plane, const FlowField& flow) {
    if (plane.height() != flow.height() || plane.width() != flow.width()) {
        throw ShapeError("warp: flow shape does not match plane");
    }
    Plane out(plane.height(), plane.width());
    for (int y = 0; y < plane.height(); ++y) {
        for (int x = 0; x < plane.width(); ++x) {
            out.at(y, x) = sample_bilinear(plane, x + flow.u.at(y, x), y + flow.v.at(y, x));
        }
    }
    return out;
}

Frame downsample_area(const Frame& frame) {
    const Frame even = pad_even(frame);
    Frame out(even.height() / 2, even.width() / 2, even.channels());
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int c = 0; c < out.channels(); ++c) {
                out.at(y, x, c) = 0.25 * (even.at(2 * y, 2 * x, c) + even.at(2 * y, 2 * x + 1, c) +
                                          even.at(2 * y + 1, 2 * x, c) +
                                          even.at(2 * y + 1, 2 * x + 1, c));
            }
        }
    }
    return out;
}

std::vector<Frame> build_pyramid(const Frame& frame, int levels) {
    if (levels < 1) throw std::invalid_argument("build_pyramid: levels must be >= 1");
    const int min_side = 1 << (levels - 1);
    if (frame.height() < std::max(4, min_side) || frame.width() < std::max(4, min_side)) {
        throw ShapeError("build_pyramid: frame too small for the requested levels");
    }
    std::vector<Frame> out;
    out.reserve(levels);
    out.push_back(frame);
    for (int i = 1; i < levels; ++i) out.push_back(downsample_area(out.back()));
    return out;
}

HaarBands haar_dwt(const Frame& frame) {
    HaarBands bands;
    bands.source_height = frame.height();
    bands.source_width = frame.width();
    bands.padded_rows = frame.height() % 2 != 0;
    bands.padded_cols = frame.width() % 2 != 0;
    const Frame even = pad_even(frame);
    const int h = even.height() / 2;
    const int w = even.width() / 2;
    const int ch = even.channels();
    bands.ll = Frame(h, w, ch);
    bands.lh = Frame(h, w, ch);
    bands.hl = Frame(h, w, ch);
    bands.hh = Frame(h, w, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                const double a = even.at(2 * y, 2 * x, c);
                const double b = even.at(2 * y, 2 * x + 1, c);
                const double d0 = even.at(2 * y + 1, 2 * x, c);
                const double d1 = even.at(2 * y + 1, 2 * x + 1, c);
                bands.ll.at(y, x, c) = 0.5 * (a + b + d0 + d1);
                bands.lh.at(y, x, c) = 0.5 * (a + b - d0 - d1);
                bands.hl.at(y, x, c) = 0.5 * (a - b + d0 - d1);
                bands.hh.at(y, x, c) = 0.5 * (a - b - d0 + d1);
            }
        }
    }
    return bands;
}

Frame haar_idwt(const HaarBands& bands) {
    const int h = bands.ll.height();
    const int w = bands.ll.width();
    const int ch = bands.ll.channels();
    if (!bands.lh.same_shape(bands.ll) || !bands.hl.same_shape(bands.ll) ||
        !bands.hh.same_shape(bands.ll)) {
        throw ShapeError("haar_idwt: subband shapes differ");
    }
    Frame even(2 * h, 2 * w, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                const double ll = bands.ll.at(y, x, c);
                const double lh = bands.lh.at(y, x, c);
                const double hl = bands.hl.at(y, x, c);
                const double hh = bands.hh.at(y, x, c);
                even.at(2 * y, 2 * x, c) = 0.5 * (ll + lh + hl + hh);
                even.at(2 * y, 2 * x + 1, c) = 0.5 * (ll + lh - hl - hh);
                even.at(2 * y + 1, 2 * x, c) = 0.5 * (ll - lh + hl - hh);
                even.at(2 * y + 1, 2 * x + 1, c) = 0.5 * (ll - lh - hl + hh);
            }
        }
    }
    if (!bands.padded_rows && !bands.padded_cols) return even;
    return crop(even, 0, 0, bands.source_width, bands.source_height);
}

Frame laplacian(const Frame& frame) {
    const int h = frame.height();
    const int w = frame.width();
    Frame out(h, w, frame.channels());
    for (int y = 0; y < h; ++y) {
        const int yu = clampi(y - 1, 0, h - 1);
        const int yd = clampi(y + 1, 0, h - 1);
        for (int x = 0; x < w; ++x) {
            const int xl = clampi(x - 1, 0, w - 1);
            const int xr = clampi(x + 1, 0, w - 1);
            for (int c = 0; c < frame.channels(); ++c) {
                out.at(y, x, c) = frame.at(yu, x, c) + frame.at(yd, x, c) + frame.at(y, xl, c) +
                                  frame.at(y, xr, c) - 4.0 * frame.at(y, x, c);
            }
        }
    }
    return out;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
    if (radius < 0) radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    return k;
}

Plane gaussian_blur(const Plane& plane, double sigma) {
    if (sigma <= 0.0) return plane;
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    const int h = plane.height();
    const int w = plane.width();
    Plane tmp(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * plane.at(y, clampi(x + i, 0, w - 1));
            tmp.at(y, x) = acc;
        }
    }
    Plane out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(clampi(y + i, 0, h - 1), x);
            out.at(y, x) = acc;
        }
    }
    return out;
}

Frame gaussian_blur(const Frame& frame, double sigma) {
    if (sigma <= 0.0) return frame;
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    const int h = frame.height();
    const int w = frame.width();
    const int ch = frame.channels();
    Frame tmp(h, w, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * frame.at(y, clampi(x + i, 0, w - 1), c);
                tmp.at(y, x, c) = acc;
            }
        }
    }
    Frame out(h, w, ch);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < ch; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(clampi(y + i, 0, h - 1), x, c);
                out.at(y, x, c) = acc;
            }
        }
    }
    return out;
}

Plane to_gray(const Frame& frame) {
    Plane out(frame.height(), frame.width());
    for (int y = 0; y < frame.height(); ++y) {
        for (int x = 0; x < frame.width(); ++x) {
            out.at(y, x) = frame.channels() == 1
                               ? frame.at(y, x, 0)
                               : 0.299 * frame.at(y, x, 0) + 0.587 * frame.at(y, x, 1) +
                                     0.114 * frame.at(y, x, 2);
        }
    }
    return out;
}

Frame gray_frame(const Plane& plane) {
    Frame out(plane.height(), plane.width(), 1);
    std::copy(plane.data().begin(), plane.data().end(), out.data().begin());
    return out;
}

Plane gradient_magnitude(const Plane& plane) {
    const int h = plane.height();
    const int w = plane.width();
    Plane out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gx =
                0.5 * (plane.at(y, clampi(x + 1, 0, w - 1)) - plane.at(y, clampi(x - 1, 0, w - 1)));
            const double gy =
                0.5 * (plane.at(clampi(y + 1, 0, h - 1), x) - plane.at(clampi(y - 1, 0, h - 1), x));
            out.at(y, x) = std::hypot(gx, gy);
        }
    }
    return out;
}

Frame crop(const Frame& frame, int x0, int y0, int width, int height) {
    if (x0 < 0 || y0 < 0 || x0 + width > frame.width() || y0 + height > frame.height()) {
        throw ShapeError("crop window outside the frame");
    }
    Frame out(height, width, frame.channels());
    for (int y = 0; y < height; ++y) {
        const auto src = frame.data().subspan(
            (static_cast<std::size_t>(y0 + y) * frame.width() + x0) * frame.channels(),
            static_cast<std::size_t>(width) * frame.channels());
        std::copy(src.begin(), src.end(),
                  out.data().begin() + static_cast<std::ptrdiff_t>(y) * width * frame.channels());
    }
    return out;
}

Frame resize_bilinear(const Frame& frame, int height, int width) {
    if (height == frame.height() && width == frame.width()) return frame;
    Frame out(height, width, frame.channels());
    const double sy = static_cast<double>(frame.height()) / height;
    const double sx = static_cast<double>(frame.width()) / width;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < frame.channels(); ++c) {
                out.at(y, x, c) = sample_bilinear(frame, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5, c);
            }
        }
    }
    return out;
}

Frame clamp01(Frame frame) {
    for (auto& v : frame.data()) v = std::clamp(v, 0.0, 1.0);
    return frame;
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double f = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - f) + values[hi] * f;
}

}  // namespace turbrec
