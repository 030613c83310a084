#include "turbrec/turbsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <stdexcept>
#include <vector>

#include "turbrec/image_ops.hpp"
#include "turbrec/rng.hpp"

namespace turbrec::turbsim {

namespace {

constexpr std::uint64_t kTiltStream = 0x7111;
constexpr std::uint64_t kBlurStream = 0xB1;
constexpr std::uint64_t kJitterStream = 0x717;
constexpr int kBlurTile = 32;
constexpr int kBlurLevels = 5;
constexpr double kJitterCorrLength = 12.0;

int smoothing_radius(double sigma) {
    return sigma > 0.0 ? std::max(1, static_cast<int>(std::ceil(3.0 * sigma))) : 0;
}

Plane white_noise(int h, int w, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    Plane p(h, w);
    for (double& v : p.data()) v = n01(rng);
    return p;
}

// Valid-mode separable smoothing of a padded white-noise grid, rescaled to
// unit per-pixel variance.
Plane smooth_unit(const Plane& padded, double sigma, int pad, int h, int w) {
    if (pad == 0) return padded;
    const auto k = gaussian_kernel(sigma, pad);
    double k2 = 0.0;
    for (double v : k) k2 += v * v;
    const double scale = 1.0 / k2;  // 2D kernel energy is (sum k^2)^2
    Plane tmp(padded.height(), w);
    for (int y = 0; y < padded.height(); ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = 0; i <= 2 * pad; ++i) acc += k[i] * padded.at(y, x + i);
            tmp.at(y, x) = acc;
        }
    }
    Plane out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = 0; i <= 2 * pad; ++i) acc += k[i] * tmp.at(y + i, x);
            out.at(y, x) = acc * scale;
        }
    }
    return out;
}

nlohmann::json to_json(const TurbulenceParams& p) {
    return {{"tilt_sigma", p.tilt_sigma},
            {"tilt_corr_length", p.tilt_corr_length},
            {"blur_sigma_range", {p.blur_sigma_min, p.blur_sigma_max}},
            {"intensity_jitter", p.intensity_jitter},
            {"temporal_corr", p.temporal_corr}};
}

TurbulenceParams from_json(const nlohmann::json& j) {
    TurbulenceParams p;
    p.tilt_sigma = j.at("tilt_sigma").get<double>();
    p.tilt_corr_length = j.value("tilt_corr_length", p.tilt_corr_length);
    const auto& br = j.at("blur_sigma_range");
    p.blur_sigma_min = br.at(0).get<double>();
    p.blur_sigma_max = br.at(1).get<double>();
    p.intensity_jitter = j.value("intensity_jitter", 0.0);
    p.temporal_corr = j.value("temporal_corr", 0.0);
    p.validate();
    return p;
}

}  // namespace

void TurbulenceParams::validate() const {
    if (!(tilt_sigma >= 0.0)) throw std::invalid_argument("tilt_sigma must be >= 0");
    if (!(tilt_corr_length >= 0.0)) throw std::invalid_argument("tilt_corr_length must be >= 0");
    if (!(blur_sigma_min >= 0.0) || !(blur_sigma_min <= blur_sigma_max)) {
        throw std::invalid_argument("blur_sigma_range must satisfy 0 <= min <= max");
    }
    if (!(intensity_jitter >= 0.0)) throw std::invalid_argument("intensity_jitter must be >= 0");
    if (!(temporal_corr >= 0.0 && temporal_corr < 1.0)) {
        throw std::invalid_argument("temporal_corr must lie in [0, 1)");
    }
}

Level parse_level(const std::string& name) {
    if (name == "weak") return Level::weak;
    if (name == "medium") return Level::medium;
    if (name == "strong") return Level::strong;
    throw std::invalid_argument("unknown turbulence level: " + name);
}

std::string level_name(Level level) {
    switch (level) {
        case Level::weak: return "weak";
        case Level::medium: return "medium";
        case Level::strong: return "strong";
    }
    return "?";
}

PresetTable builtin_presets() {
    PresetTable t;
    t.version = 1;
    t.presets["weak"] = {0.5, 6.0, 0.3, 0.7, 0.01, 0.5, 0};
    t.presets["medium"] = {1.5, 6.0, 0.6, 1.2, 0.02, 0.5, 0};
    t.presets["strong"] = {3.0, 6.0, 1.0, 2.0, 0.04, 0.5, 0};
    return t;
}

TurbulenceParams preset(Level level, std::uint64_t seed) {
    auto p = builtin_presets().presets.at(level_name(level));
    p.seed = seed;
    return p;
}

PresetTable load_presets(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open preset file " + path.string());
    const auto j = nlohmann::json::parse(in);
    PresetTable t;
    t.version = j.at("version").get<int>();
    for (const auto& [name, value] : j.at("presets").items()) t.presets[name] = from_json(value);
    return t;
}

TiltSequence::TiltSequence(int height, int width, TurbulenceParams params)
    : h_(height), w_(width), pad_(smoothing_radius(params.tilt_corr_length)), params_(params) {
    params_.validate();
}

FlowField TiltSequence::next() {
    const std::size_t t = t_++;
    FlowField field(h_, w_);
    if (params_.tilt_sigma == 0.0) return field;
    const int ph = h_ + 2 * pad_;
    const int pw = w_ + 2 * pad_;
    auto rng = make_rng(params_.seed, {kTiltStream, t});
    Plane nu = white_noise(ph, pw, rng);
    Plane nv = white_noise(ph, pw, rng);
    if (t == 0) {
        raw_u_ = std::move(nu);
        raw_v_ = std::move(nv);
    } else {
        const double rho = params_.temporal_corr;
        const double innov = std::sqrt(1.0 - rho * rho);
        for (std::size_t i = 0; i < raw_u_.size(); ++i) {
            raw_u_.data()[i] = rho * raw_u_.data()[i] + innov * nu.data()[i];
            raw_v_.data()[i] = rho * raw_v_.data()[i] + innov * nv.data()[i];
        }
    }
    field.u = smooth_unit(raw_u_, params_.tilt_corr_length, pad_, h_, w_);
    field.v = smooth_unit(raw_v_, params_.tilt_corr_length, pad_, h_, w_);
    for (double& v : field.u.data()) v *= params_.tilt_sigma;
    for (double& v : field.v.data()) v *= params_.tilt_sigma;
    return field;
}

FlowField sample_tilt_field(int height, int width, const TurbulenceParams& params,
                            std::size_t t_index) {
    TiltSequence seq(height, width, params);
    if (params.tilt_sigma == 0.0) return FlowField(height, width);
    FlowField f;
    for (std::size_t t = 0; t <= t_index; ++t) f = seq.next();
    return f;
}

Frame blur_and_jitter(const Frame& warped, const TurbulenceParams& params, std::size_t t_index) {
    const int h = warped.height();
    const int w = warped.width();
    Frame out = warped;

    if (params.blur_sigma_max > 0.0) {
        auto rng = make_rng(params.seed, {kBlurStream, t_index});
        std::uniform_real_distribution<double> pick(params.blur_sigma_min, params.blur_sigma_max);
        const int tiles_y = (h + kBlurTile - 1) / kBlurTile;
        const int tiles_x = (w + kBlurTile - 1) / kBlurTile;
        Plane tile_sigma(tiles_y, tiles_x);
        for (double& s : tile_sigma.data()) s = pick(rng);

        const int levels = params.blur_sigma_max - params.blur_sigma_min > 1e-12 ? kBlurLevels : 1;
        std::vector<double> sigmas(levels);
        std::vector<Frame> blurred;
        for (int i = 0; i < levels; ++i) {
            sigmas[i] = levels == 1 ? params.blur_sigma_max
                                    : params.blur_sigma_min +
                                          (params.blur_sigma_max - params.blur_sigma_min) * i / (levels - 1);
            blurred.push_back(gaussian_blur(warped, sigmas[i]));
        }
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                // Tile centres are the interpolation nodes; blends tile boundaries.
                const double s = sample_bilinear(tile_sigma, (x + 0.5) / kBlurTile - 0.5,
                                                 (y + 0.5) / kBlurTile - 0.5);
                int lo = 0;
                double f = 0.0;
                if (levels > 1) {
                    const double pos = (s - sigmas.front()) / (sigmas.back() - sigmas.front()) * (levels - 1);
                    lo = std::clamp(static_cast<int>(std::floor(pos)), 0, levels - 2);
                    f = std::clamp(pos - lo, 0.0, 1.0);
                }
                const int hi = std::min(lo + 1, levels - 1);
                for (int c = 0; c < warped.channels(); ++c) {
                    out.at(y, x, c) = f == 0.0 ? blurred[lo].at(y, x, c)
                                               : (1.0 - f) * blurred[lo].at(y, x, c) + f * blurred[hi].at(y, x, c);
                }
            }
        }
    }

    if (params.intensity_jitter > 0.0) {
        auto rng = make_rng(params.seed, {kJitterStream, t_index});
        const int pad = smoothing_radius(kJitterCorrLength);
        const Plane eps = smooth_unit(white_noise(h + 2 * pad, w + 2 * pad, rng), kJitterCorrLength, pad, h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double gain = 1.0 + params.intensity_jitter * eps.at(y, x);
                for (int c = 0; c < out.channels(); ++c) out.at(y, x, c) *= gain;
            }
        }
    }
    return clamp01(std::move(out));
}

Frame degrade(const Frame& clean, const TurbulenceParams& params, std::size_t t_index) {
    params.validate();
    const FlowField tilt = sample_tilt_field(clean.height(), clean.width(), params, t_index);
    return blur_and_jitter(warp(clean, tilt), params, t_index);
}

std::pair<VideoSequence, VideoSequence> make_paired_clip(const VideoSequence& clean,
                                                         const TurbulenceParams& params) {
    clean.validate();
    params.validate();
    const auto& first = clean.frames.front();
    TiltSequence tilt(first.height(), first.width(), params);
    VideoSequence degraded;
    degraded.id = clean.id;
    degraded.frame_rate = clean.frame_rate;
    for (std::size_t t = 0; t < clean.frames.size(); ++t) {
        degraded.frames.push_back(blur_and_jitter(warp(clean.frames[t], tilt.next()), params, t));
    }
    return {std::move(degraded), clean};
}

}  // namespace turbrec::turbsim
