#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "turbrec/frame.hpp"
#include "turbrec/rng.hpp"

namespace turbrec::datasets {

namespace fs = std::filesystem;

enum class ClipKind { scan, random };

struct CropOrigin {
    int x = 0;
    int y = 0;
    friend auto operator<=>(const CropOrigin&, const CropOrigin&) = default;
};

/// Crop trajectory binding a degraded clip to its pseudo-clean twin.
struct ClipSpec {
    std::string scene_id;
    std::string clip_id;
    ClipKind kind = ClipKind::scan;
    int crop_size = 256;
    std::vector<CropOrigin> positions;  // one crop origin per frame
    std::array<double, 2> start{0.0, 0.0};
    double speed = 0.0;                      // px / frame
    std::array<double, 2> direction{1.0, 0.0};  // unit vector
    std::uint64_t seed = 0;
    // Scan-clip provenance.
    int stride = 0;
    int densify_step = 0;
    std::string densify_mode;

    std::size_t length() const noexcept { return positions.size(); }
    /// Throws if any crop window leaves a width x height image.
    void validate(int image_width, int image_height) const;

    friend bool operator==(const ClipSpec&, const ClipSpec&) = default;
};

nlohmann::json to_json(const ClipSpec& spec);
ClipSpec clip_spec_from_json(const nlohmann::json& j);

struct PairedClip {
    VideoSequence degraded;
    VideoSequence clean;
    ClipSpec spec;
};

struct SerpentineOptions {
    int crop_size = 256;
    int stride = 6;
    int densify_step = 2;
};

/// Full densified boustrophedon path of crop origins. Row order and the
/// per-row traversal direction are drawn from rng.
std::vector<CropOrigin> serpentine_path(int image_width, int image_height,
                                        const SerpentineOptions& options, Rng& rng);

/// Splits a path into 3-5 contiguous pieces of (when possible) distinct
/// lengths. Paths shorter than 5 positions stay whole.
std::vector<std::vector<CropOrigin>> split_path(const std::vector<CropOrigin>& path, Rng& rng);

std::vector<ClipSpec> serpentine_trajectory(int image_width, int image_height,
                                            const SerpentineOptions& options, Rng& rng);

struct RandomTrajectoryOptions {
    int crop_size = 256;
    int min_length = 240;
    int max_length = 480;
    double min_speed = 4.0;
    double max_speed = 10.0;
};

/// Constant-velocity walk inside [0, max_x] x [0, max_y] with specular
/// reflection at the walls. Positions accumulate in real arithmetic and
/// are rounded per frame.
std::vector<CropOrigin> reflect_trajectory(std::array<double, 2> start, std::array<double, 2> velocity,
                                           std::size_t length, double max_x, double max_y);

ClipSpec random_trajectory(int image_width, int image_height, const RandomTrajectoryOptions& options,
                           Rng& rng);

/// Frame accessor used to cut clips without holding a whole sequence.
using FrameSource = std::function<Frame(std::size_t)>;

PairedClip cut_paired_clip(const VideoSequence& turbulent, const Frame& pseudo_clean, const ClipSpec& spec);

/// Writes <dir>/{degraded/, clean/, spec.json} frame by frame.
void cut_and_write_clip(const FrameSource& turbulent, std::size_t turbulent_length,
                        const Frame& pseudo_clean, const ClipSpec& spec, const fs::path& dir);

/// Resizes every frame to the most common resolution. Returns the number
/// of frames that were resized.
std::size_t normalize_to_dominant(std::vector<Frame>& frames);

struct SceneOptions {
    SerpentineOptions scan;
    RandomTrajectoryOptions random;
    int n_random = 10;
};

/// Scan clips followed by n_random random clips, with clip ids assigned.
std::vector<ClipSpec> plan_scene(const std::string& scene_id, int image_width, int image_height,
                                 const SceneOptions& options, Rng& rng);

std::vector<PairedClip> build_scene(const VideoSequence& turbulent, const Frame& pseudo_clean, Rng& rng,
                                    const SceneOptions& options = {});

struct SceneSplit {
    std::vector<std::string> train;
    std::vector<std::string> val;
};

/// Seeded split by scene id (val_fraction of scenes, at least one when two
/// or more scenes exist).
SceneSplit split_scenes(std::vector<std::string> scene_ids, std::uint64_t seed, double val_fraction = 0.1);

void write_clip(const fs::path& dir, const PairedClip& clip);
PairedClip read_clip(const fs::path& dir);

/// Clip directories (those holding degraded/ and clean/) below root, sorted.
std::vector<fs::path> find_clip_dirs(const fs::path& root);

}  // namespace turbrec::datasets
