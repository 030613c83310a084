#include "turbrec/matf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "turbrec/image_ops.hpp"

namespace turbrec::matf {

void MatfConfig::validate() const {
    if (w_motion < 0.0 || w_photo < 0.0 || w_fb < 0.0) throw std::invalid_argument("cue weights must be >= 0");
    if (std::abs(w_motion + w_photo + w_fb - 1.0) > 1e-9) throw std::invalid_argument("cue weights must sum to 1");
    if (edge_strength < 0.0) throw std::invalid_argument("edge_strength must be >= 0");
    if (!(ema_alpha > 0.0 && ema_alpha <= 1.0)) throw std::invalid_argument("ema_alpha must lie in (0, 1]");
    if (!(m_floor >= 0.0 && m_floor < m_ceil && m_ceil <= 1.0)) {
        throw std::invalid_argument("require 0 <= m_floor < m_ceil <= 1");
    }
    if (fixed_weight && !(*fixed_weight > 0.0 && *fixed_weight <= 1.0)) {
        throw std::invalid_argument("fixed_weight must lie in (0, 1]");
    }
    if (!(static_threshold > 0.0 && static_threshold <= 1.0)) {
        throw std::invalid_argument("static_threshold must lie in (0, 1]");
    }
}

std::array<double, 3> MatfConfig::effective_weights() const {
    if (use_fb) return {w_motion, w_photo, w_fb};
    const double s = w_motion + w_photo;
    if (s <= 0.0) return {0.0, 0.0, 0.0};
    return {w_motion / s, w_photo / s, 0.0};
}

namespace {

void normalize_cue(Plane& cue, double q, double floor) {
    const std::vector<double> values(cue.data().begin(), cue.data().end());
    const double scale = std::max(percentile(values, q), floor);
    for (double& v : cue.data()) v = std::min(v / scale, 1.0);
}

}  // namespace

MotionCues motion_cues(const FlowField& flow, const Frame& current, const Frame& warped_prev,
                       const FlowField* back_flow, const MatfConfig& config) {
    require_same_shape(current, warped_prev, "motion_cues");
    require_same_shape(current, flow, "motion_cues");
    const int h = current.height();
    const int w = current.width();
    MotionCues cues{Plane(h, w), Plane(h, w), Plane(h, w)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            cues.motion.at(y, x) = std::hypot(flow.u.at(y, x), flow.v.at(y, x));
            double diff = 0.0;
            for (int c = 0; c < current.channels(); ++c) diff += std::abs(current.at(y, x, c) - warped_prev.at(y, x, c));
            cues.photo.at(y, x) = diff / current.channels();
        }
    }
    if (back_flow != nullptr) {
        require_same_shape(current, *back_flow, "motion_cues (backward flow)");
        const Plane bu = warp(back_flow->u, flow);
        const Plane bv = warp(back_flow->v, flow);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                cues.fb.at(y, x) = std::hypot(flow.u.at(y, x) + bu.at(y, x), flow.v.at(y, x) + bv.at(y, x));
            }
        }
    }
    normalize_cue(cues.motion, config.norm_percentile, config.motion_scale_floor);
    normalize_cue(cues.photo, config.norm_percentile, config.photo_scale_floor);
    normalize_cue(cues.fb, config.norm_percentile, config.fb_scale_floor);
    return cues;
}

Plane edge_suppression(const Frame& current, const MatfConfig& config) {
    Plane g = gradient_magnitude(to_gray(current));
    if (config.edge_strength == 0.0) return Plane(g.height(), g.width(), 1.0);
    const double scale = std::max(g.max(), config.edge_scale_floor);
    for (double& v : g.data()) v = std::exp(-config.edge_strength * std::min(v / scale, 1.0));
    return g;
}

MotionMap motion_map(const MotionCues& cues, const Plane& edge, const MatfConfig& config, const MotionMap* prev) {
    config.validate();
    if (!cues.motion.same_shape(cues.photo) || !cues.motion.same_shape(cues.fb) || !cues.motion.same_shape(edge)) {
        throw ShapeError("motion_map: cue shapes differ");
    }
    if (prev != nullptr && !prev->m.same_shape(edge)) throw ShapeError("motion_map: previous map shape differs");
    const auto [wm, wp, wf] = config.effective_weights();
    MotionMap out{Plane(edge.height(), edge.width())};
    for (std::size_t i = 0; i < edge.size(); ++i) {
        const double raw =
            wm * cues.motion.data()[i] + wp * edge.data()[i] * cues.photo.data()[i] + wf * cues.fb.data()[i];
        double m = config.m_floor + (config.m_ceil - config.m_floor) * std::clamp(raw, 0.0, 1.0);
        if (prev != nullptr) m = config.ema_alpha * m + (1.0 - config.ema_alpha) * prev->m.data()[i];
        out.m.data()[i] = m;
    }
    return out;
}

Frame fuse_adaptive(const Frame& o_hat, const Frame& prev_out, const FlowField& flow, const MotionMap& m) {
    require_same_shape(o_hat, prev_out, "fuse");
    require_same_shape(o_hat, flow, "fuse");
    if (m.m.height() != o_hat.height() || m.m.width() != o_hat.width()) throw ShapeError("fuse: motion map shape");
    const Frame warped = warp(prev_out, flow);
    Frame out(o_hat.height(), o_hat.width(), o_hat.channels());
    for (int y = 0; y < o_hat.height(); ++y) {
        for (int x = 0; x < o_hat.width(); ++x) {
            const double a = m.m.at(y, x);
            for (int c = 0; c < o_hat.channels(); ++c) {
                out.at(y, x, c) = std::clamp(a * o_hat.at(y, x, c) + (1.0 - a) * warped.at(y, x, c), 0.0, 1.0);
            }
        }
    }
    return out;
}

Frame fuse_fixed(const Frame& o_hat, const Frame& prev_out, double w) {
    require_same_shape(o_hat, prev_out, "fuse");
    Frame out(o_hat.height(), o_hat.width(), o_hat.channels());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = std::clamp(w * o_hat.data()[i] + (1.0 - w) * prev_out.data()[i], 0.0, 1.0);
    }
    return out;
}

StaticMask static_mask(const MotionMap& m, const MatfConfig& config) {
    const double tau = config.static_threshold;
    StaticMask s{Plane(m.m.height(), m.m.width())};
    for (std::size_t i = 0; i < m.m.size(); ++i) s.s.data()[i] = std::clamp((tau - m.m.data()[i]) / tau, 0.0, 1.0);
    return s;
}

std::vector<Frame> fixed_recurrence(const std::vector<Frame>& estimates, double w, const Frame& initial) {
    std::vector<Frame> out;
    out.reserve(estimates.size());
    const Frame* prev = &initial;
    for (const auto& est : estimates) {
        out.push_back(fuse_fixed(est, *prev, w));
        prev = &out.back();
    }
    return out;
}

VideoSequence fixed_fusion_clip(const VideoSequence& estimates, double w) {
    estimates.validate();
    VideoSequence out;
    out.id = estimates.id;
    out.frame_rate = estimates.frame_rate;
    out.frames.reserve(estimates.length());
    out.frames.push_back(estimates.frames.front());
    for (std::size_t t = 1; t < estimates.length(); ++t) {
        out.frames.push_back(fuse_fixed(estimates.frames[t], out.frames.back(), w));
    }
    return out;
}

}  // namespace turbrec::matf
