#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace turbrec {

/// Raised when two arrays that must agree in shape do not.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// H x W x C image, interleaved (HWC), double precision.
///
/// Pixel values are nominally in [0, 1]; intermediate results such as
/// wavelet subbands or Laplacian responses reuse this container and may
/// leave that range. Only the I/O layer clamps.
class Frame {
public:
    Frame() = default;
    Frame(int height, int width, int channels, double fill = 0.0);

    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    int channels() const noexcept { return c_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool same_shape(const Frame& other) const noexcept {
        return h_ == other.h_ && w_ == other.w_ && c_ == other.c_;
    }
    bool all_finite() const noexcept;
    double mean() const noexcept;

    friend bool operator==(const Frame&, const Frame&) = default;

private:
    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * w_ + x) * c_ + c;
    }

    int h_ = 0;
    int w_ = 0;
    int c_ = 0;
    std::vector<double> data_;
};

/// Single-channel H x W real array (motion maps, masks, cue maps).
class Plane {
public:
    Plane() = default;
    Plane(int height, int width, double fill = 0.0);

    int height() const noexcept { return h_; }
    int width() const noexcept { return w_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& at(int y, int x) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
    double at(int y, int x) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool same_shape(const Plane& other) const noexcept { return h_ == other.h_ && w_ == other.w_; }
    double mean() const noexcept;
    double min() const noexcept;
    double max() const noexcept;

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    int h_ = 0;
    int w_ = 0;
    std::vector<double> data_;
};

/// Per-pixel displacement in pixels; u is along x (columns), v along y (rows).
struct FlowField {
    Plane u;
    Plane v;

    FlowField() = default;
    FlowField(int height, int width) : u(height, width), v(height, width) {}

    int height() const noexcept { return u.height(); }
    int width() const noexcept { return u.width(); }
    bool all_finite() const noexcept;
    double mean_magnitude() const noexcept;

    friend bool operator==(const FlowField&, const FlowField&) = default;
};

struct VideoSequence {
    std::vector<Frame> frames;
    std::optional<double> frame_rate;
    std::string id;

    std::size_t length() const noexcept { return frames.size(); }
    /// Throws ShapeError unless non-empty with uniform frame shape.
    void validate() const;
};

void require_same_shape(const Frame& a, const Frame& b, const char* what);
void require_same_shape(const Frame& frame, const FlowField& flow, const char* what);

}  // namespace turbrec
