#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "turbrec/frame.hpp"
#include "turbrec/optical_flow.hpp"

namespace turbrec::eval {

namespace fs = std::filesystem;

inline constexpr int kReportSchemaVersion = 1;

enum class MotionLabel { slow, fast };
std::string label_name(MotionLabel label);

struct MotionBins {
    std::vector<std::string> slow;
    std::vector<std::string> fast;
    double threshold = 0.0;
};

/// Mean classic-flow magnitude over consecutive frames (0 for one frame).
double mean_displacement(const VideoSequence& clip, const ClassicFlowOptions& options = {});

/// Splits clips by mean displacement: <= threshold is slow. Without a
/// threshold the median displacement of the set is used.
MotionBins motion_bin(const std::vector<std::pair<std::string, double>>& displacements,
                      std::optional<double> threshold = std::nullopt);
MotionBins motion_bin(const std::vector<VideoSequence>& clips, std::optional<double> threshold = std::nullopt);

/// Precomputed learned-distance values per clip: "frame" holds one value
/// per frame, "temporal" one per consecutive pair.
struct PerceptualEntry {
    std::vector<double> frame;
    std::vector<double> temporal;
};
using PerceptualTable = std::map<std::string, PerceptualEntry>;
PerceptualTable read_perceptual_table(const fs::path& path);

struct ClipMetrics {
    std::string id;
    std::size_t frames = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> perceptual;
    std::optional<double> temporal;  // learned distance if given, else L1 built-in; needs >= 2 frames
    std::string temporal_source;     // "l1" or "table"
    double displacement = 0.0;
    std::optional<MotionLabel> bin;
};

struct Aggregate {
    std::size_t clips = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> perceptual;
    std::optional<double> temporal;
};

struct MetricReport {
    int schema_version = kReportSchemaVersion;
    std::vector<ClipMetrics> clips;
    Aggregate aggregate;
    std::map<std::string, Aggregate> bins;  // "slow" / "fast"
    std::optional<double> bin_threshold;
    std::vector<std::string> missing;  // reference clips without a restored counterpart

    std::string table() const;
};

void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);
void write_report(const fs::path& path, const MetricReport& report);
MetricReport read_report(const fs::path& path);

Aggregate aggregate(const std::vector<const ClipMetrics*>& clips);

struct EvalOptions {
    bool bins = false;
    std::optional<double> bin_threshold;
    std::optional<PerceptualTable> perceptual;
};

/// restored[i] is compared with reference[i]; ids come from the reference.
MetricReport evaluate(const std::vector<VideoSequence>& restored, const std::vector<VideoSequence>& reference,
                      const EvalOptions& options = {});

/// Pairs clips by their path relative to each root. A reference clip is a
/// frame directory or a dataset clip directory (its clean/ frames are used).
MetricReport evaluate(const fs::path& restored_dir, const fs::path& reference_dir, const EvalOptions& options = {});

}  // namespace turbrec::eval
