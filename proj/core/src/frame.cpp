#include "turbrec/frame.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace turbrec {

Frame::Frame(int height, int width, int channels, double fill)
    : h_(height), w_(width), c_(channels) {
    if (height <= 0 || width <= 0) {
        throw ShapeError("frame dimensions must be positive");
    }
    if (channels != 1 && channels != 3) {
        throw ShapeError("frame must have 1 or 3 channels");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

bool Frame::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Frame::mean() const noexcept {
    if (data_.empty()) return 0.0;
    return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

Plane::Plane(int height, int width, double fill) : h_(height), w_(width) {
    if (height <= 0 || width <= 0) {
        throw ShapeError("plane dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(height) * width, fill);
}

double Plane::mean() const noexcept {
    if (data_.empty()) return 0.0;
    return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

double Plane::min() const noexcept {
    return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Plane::max() const noexcept {
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

bool FlowField::all_finite() const noexcept {
    auto finite = [](double x) { return std::isfinite(x); };
    return std::all_of(u.data().begin(), u.data().end(), finite) &&
           std::all_of(v.data().begin(), v.data().end(), finite);
}

double FlowField::mean_magnitude() const noexcept {
    if (u.size() == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        acc += std::hypot(u.data()[i], v.data()[i]);
    }
    return acc / static_cast<double>(u.size());
}

void VideoSequence::validate() const {
    if (frames.empty()) {
        throw ShapeError("video sequence must contain at least one frame");
    }
    for (const auto& f : frames) {
        if (!f.same_shape(frames.front())) {
            throw ShapeError("video sequence frames must share a shape");
        }
    }
}

void require_same_shape(const Frame& a, const Frame& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": frame shapes differ");
    }
}

void require_same_shape(const Frame& frame, const FlowField& flow, const char* what) {
    if (frame.height() != flow.height() || frame.width() != flow.width() ||
        flow.v.height() != flow.u.height() || flow.v.width() != flow.u.width()) {
        throw ShapeError(std::string(what) + ": flow shape does not match frame");
    }
}

}  // namespace turbrec
