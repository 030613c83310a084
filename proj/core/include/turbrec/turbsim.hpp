#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>

#include "turbrec/frame.hpp"

namespace turbrec::turbsim {

/// Toy tilt-then-blur-then-jitter turbulence model.
struct TurbulenceParams {
    double tilt_sigma = 0.0;        // px, per-component displacement std
    double tilt_corr_length = 6.0;  // px, Gaussian smoothing scale of the tilt field
    double blur_sigma_min = 0.0;    // px
    double blur_sigma_max = 0.0;    // px
    double intensity_jitter = 0.0;  // std of the multiplicative (1 + eps) field
    double temporal_corr = 0.0;     // AR(1) coefficient across frames, in [0, 1)
    std::uint64_t seed = 0;

    void validate() const;
};

enum class Level { weak, medium, strong };

Level parse_level(const std::string& name);
std::string level_name(Level level);

/// Built-in defaults; identical to config/turbsim_presets.json.
TurbulenceParams preset(Level level, std::uint64_t seed = 0);

struct PresetTable {
    int version = 1;
    std::map<std::string, TurbulenceParams> presets;
};
PresetTable load_presets(const std::filesystem::path& path);
PresetTable builtin_presets();

/// Tilt field at frame t_index. Deterministic in (seed, t_index); replays
/// the AR(1) recursion from frame 0, so cost grows with t_index.
FlowField sample_tilt_field(int height, int width, const TurbulenceParams& params,
                            std::size_t t_index);

/// Sequential generator producing the same fields as sample_tilt_field in
/// O(1) per frame.
class TiltSequence {
public:
    TiltSequence(int height, int width, TurbulenceParams params);
    /// Field for the next frame index (0, 1, 2, ...).
    FlowField next();
    std::size_t index() const noexcept { return t_; }

private:
    int h_, w_;
    int pad_;
    TurbulenceParams params_;
    std::size_t t_ = 0;
    Plane raw_u_, raw_v_;  // unsmoothed AR(1) state on the padded grid
};

/// Blur and jitter stages only, seeded by (seed, t_index).
Frame blur_and_jitter(const Frame& warped, const TurbulenceParams& params, std::size_t t_index);

Frame degrade(const Frame& clean, const TurbulenceParams& params, std::size_t t_index);

/// degraded_t = degrade(clean_t, params, t).
std::pair<VideoSequence, VideoSequence> make_paired_clip(const VideoSequence& clean,
                                                         const TurbulenceParams& params);

}  // namespace turbrec::turbsim
