#pragma once

#include <array>
#include <cstdint>

#include "turbrec/frame.hpp"

namespace turbrec::synthetic {

/// Procedural RGB test pattern in [0, 1]: oriented gratings, soft blobs and
/// hard-edged rectangles. Deterministic in seed.
Frame textured_image(int height, int width, std::uint64_t seed);

/// n identical frames.
VideoSequence static_clip(const Frame& image, std::size_t n, const std::string& id = "static");

/// n crops of size crop x crop sliding across `canvas` at `velocity`
/// px/frame (reflecting at the canvas border), starting at `start`.
VideoSequence translating_clip(const Frame& canvas, int crop, std::size_t n, std::array<double, 2> start,
                               std::array<double, 2> velocity, const std::string& id = "moving");

}  // namespace turbrec::synthetic
