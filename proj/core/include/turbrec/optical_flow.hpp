#pragma once

#include "turbrec/frame.hpp"

namespace turbrec {

struct ClassicFlowOptions {
    int levels = 3;
    int window = 7;
    int iterations = 5;
    double prefilter_sigma = 1.0;
    double min_eigenvalue = 1e-6;  // on window-averaged structure tensor
};

/// Pyramidal Lucas-Kanade. The returned flow maps `a` onto `b`:
/// b(p + flow(p)) ~= a(p). Textureless regions yield zero flow.
FlowField estimate_flow_classic(const Frame& a, const Frame& b,
                                const ClassicFlowOptions& options = {});

}  // namespace turbrec
