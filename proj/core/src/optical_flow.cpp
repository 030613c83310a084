#include "turbrec/optical_flow.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "turbrec/image_ops.hpp"

namespace turbrec {

namespace {

Plane box_sum(const Plane& p, int radius) {
    const int h = p.height();
    const int w = p.width();
    Plane tmp(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = std::max(0, x - radius); i <= std::min(w - 1, x + radius); ++i) acc += p.at(y, i);
            tmp.at(y, x) = acc;
        }
    }
    Plane out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int j = std::max(0, y - radius); j <= std::min(h - 1, y + radius); ++j) acc += tmp.at(j, x);
            out.at(y, x) = acc;
        }
    }
    return out;
}

Plane half(const Plane& p) { return to_gray(downsample_area(gray_frame(p))); }

FlowField upsample_flow(const FlowField& f, int height, int width) {
    FlowField out(height, width);
    const double sy = static_cast<double>(f.height()) / height;
    const double sx = static_cast<double>(f.width()) / width;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const double fy = (y + 0.5) * sy - 0.5;
            out.u.at(y, x) = sample_bilinear(f.u, fx, fy) / sx;
            out.v.at(y, x) = sample_bilinear(f.v, fx, fy) / sy;
        }
    }
    return out;
}

void refine_level(const Plane& a, const Plane& b, FlowField& flow, const ClassicFlowOptions& opt) {
    const int h = a.height();
    const int w = a.width();
    const int r = opt.window / 2;
    const double n = static_cast<double>(opt.window * opt.window);
    const Plane ga_x = [&] {
        Plane g(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                g.at(y, x) = 0.5 * (a.at(y, std::min(x + 1, w - 1)) - a.at(y, std::max(x - 1, 0)));
        return g;
    }();
    const Plane ga_y = [&] {
        Plane g(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                g.at(y, x) = 0.5 * (a.at(std::min(y + 1, h - 1), x) - a.at(std::max(y - 1, 0), x));
        return g;
    }();

    for (int it = 0; it < opt.iterations; ++it) {
        const Plane bw = warp(b, flow);
        Plane ixx(h, w), ixy(h, w), iyy(h, w), ixt(h, w), iyt(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double bx = 0.5 * (bw.at(y, std::min(x + 1, w - 1)) - bw.at(y, std::max(x - 1, 0)));
                const double by = 0.5 * (bw.at(std::min(y + 1, h - 1), x) - bw.at(std::max(y - 1, 0), x));
                const double gx = 0.5 * (ga_x.at(y, x) + bx);
                const double gy = 0.5 * (ga_y.at(y, x) + by);
                const double gt = bw.at(y, x) - a.at(y, x);
                ixx.at(y, x) = gx * gx;
                ixy.at(y, x) = gx * gy;
                iyy.at(y, x) = gy * gy;
                ixt.at(y, x) = gx * gt;
                iyt.at(y, x) = gy * gt;
            }
        }
        const Plane sxx = box_sum(ixx, r), sxy = box_sum(ixy, r), syy = box_sum(iyy, r);
        const Plane sxt = box_sum(ixt, r), syt = box_sum(iyt, r);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double a11 = sxx.at(y, x) / n, a12 = sxy.at(y, x) / n, a22 = syy.at(y, x) / n;
                const double tr = a11 + a22;
                const double det = a11 * a22 - a12 * a12;
                const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
                const double min_eig = 0.5 * tr - disc;
                if (min_eig < opt.min_eigenvalue) continue;
                const double b1 = -sxt.at(y, x) / n;
                const double b2 = -syt.at(y, x) / n;
                const double du = (a22 * b1 - a12 * b2) / det;
                const double dv = (a11 * b2 - a12 * b1) / det;
                // Bounded per-iteration update keeps aliasing at coarse levels in check.
                flow.u.at(y, x) += std::clamp(du, -2.0, 2.0);
                flow.v.at(y, x) += std::clamp(dv, -2.0, 2.0);
            }
        }
    }
}

}  // namespace

FlowField estimate_flow_classic(const Frame& a, const Frame& b, const ClassicFlowOptions& options) {
    require_same_shape(a, b, "estimate_flow_classic");
    std::vector<Plane> pa{gaussian_blur(to_gray(a), options.prefilter_sigma)};
    std::vector<Plane> pb{gaussian_blur(to_gray(b), options.prefilter_sigma)};
    for (int l = 1; l < options.levels; ++l) {
        if (pa.back().height() < 16 || pa.back().width() < 16) break;
        pa.push_back(half(pa.back()));
        pb.push_back(half(pb.back()));
    }
    FlowField flow(pa.back().height(), pa.back().width());
    for (int l = static_cast<int>(pa.size()) - 1; l >= 0; --l) {
        if (flow.height() != pa[l].height() || flow.width() != pa[l].width()) {
            flow = upsample_flow(flow, pa[l].height(), pa[l].width());
        }
        refine_level(pa[l], pb[l], flow, options);
    }
    return flow;
}

}  // namespace turbrec
