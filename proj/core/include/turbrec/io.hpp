#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "turbrec/frame.hpp"

namespace turbrec::io {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 8-bit grayscale or RGB PNG. Values are clamped to [0, 1] and quantized
/// on write.
Frame read_png(const fs::path& path);
void write_png(const fs::path& path, const Frame& frame);
void write_png(const fs::path& path, const Plane& plane);

/// Zero-padded frame name, 1-based: frame_name(0) == "000001.png".
std::string frame_name(std::size_t index);

/// Directory of numbered PNG frames plus a meta.json sidecar
/// ({"fps", "id", "shape": [H, W, C], "frames"}). meta.json is optional on
/// read; the id then defaults to the directory name.
VideoSequence read_video(const fs::path& dir);
void write_video(const fs::path& dir, const VideoSequence& video);
bool is_video_dir(const fs::path& dir);

/// Raw little-endian float32, u plane then v plane, with a JSON sidecar
/// {"H", "W"} at flowmeta_path(path).
void write_flow(const fs::path& path, const FlowField& flow);
FlowField read_flow(const fs::path& path);
fs::path flowmeta_path(const fs::path& path);

}  // namespace turbrec::io
