#pragma once

#include <array>
#include <optional>
#include <vector>

#include "turbrec/frame.hpp"

namespace turbrec::matf {

/// Per-pixel trust in the current restoration, in [0, 1].
struct MotionMap {
    Plane m;
};

/// Static-region weight derived from a motion map, in [0, 1].
struct StaticMask {
    Plane s;
};

struct MatfConfig {
    double w_motion = 0.4;
    double w_photo = 0.4;
    double w_fb = 0.2;
    double edge_strength = 4.0;
    double ema_alpha = 0.6;
    double m_floor = 0.1;
    double m_ceil = 1.0;
    std::optional<double> fixed_weight;  // fixed-mode M; unset means adaptive
    bool use_fb = false;
    double static_threshold = 0.3;  // tau of the soft static mask

    // Robust cue normalisation: divide by max(percentile, floor).
    double norm_percentile = 95.0;
    double motion_scale_floor = 2.0;   // px
    double photo_scale_floor = 0.05;   // intensity
    double fb_scale_floor = 1.0;       // px
    double edge_scale_floor = 0.1;     // gradient magnitude

    void validate() const;
    /// Cue weights actually applied; without forward-backward flow the
    /// remaining two weights are rescaled to sum to one.
    std::array<double, 3> effective_weights() const;
};

struct MotionCues {
    Plane motion;  // |flow|
    Plane photo;   // mean_c |current - warped_prev|
    Plane fb;      // |flow(p) + back(p + flow(p))|, zero without back flow
};

/// Each cue is normalised to [0, 1] independently.
MotionCues motion_cues(const FlowField& flow, const Frame& current, const Frame& warped_prev,
                       const FlowField* back_flow, const MatfConfig& config);

/// exp(-edge_strength * G) with G the normalised gradient magnitude of the
/// current frame. Multiplies the photometric cue only.
Plane edge_suppression(const Frame& current, const MatfConfig& config);

/// m = floor + (ceil - floor) * clamp(weighted cue sum, 0, 1), then an EMA
/// against prev when given: m <- alpha * m + (1 - alpha) * prev.
MotionMap motion_map(const MotionCues& cues, const Plane& edge, const MatfConfig& config,
                     const MotionMap* prev = nullptr);

/// O = m * o_hat + (1 - m) * warp(prev_out, flow), clamped to [0, 1].
Frame fuse_adaptive(const Frame& o_hat, const Frame& prev_out, const FlowField& flow, const MotionMap& m);

/// O = w * o_hat + (1 - w) * prev_out with no warping, clamped to [0, 1].
Frame fuse_fixed(const Frame& o_hat, const Frame& prev_out, double w);

/// s = clamp((tau - m) / tau, 0, 1).
StaticMask static_mask(const MotionMap& m, const MatfConfig& config);

/// Runs O_t = w * est_t + (1 - w) * O_{t-1} over estimates starting from
/// `initial` (O_0). Returns O_1 .. O_n.
std::vector<Frame> fixed_recurrence(const std::vector<Frame>& estimates, double w, const Frame& initial);

/// Recurrence with O_0 = est_0 (the pass-through start used for whole
/// clips). Returns one output per input frame.
VideoSequence fixed_fusion_clip(const VideoSequence& estimates, double w);

/// Current-frame weight M for a history weight w (M = 1 - w).
inline double current_weight_from_history(double history_weight) { return 1.0 - history_weight; }

}  // namespace turbrec::matf
