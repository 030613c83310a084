#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "turbrec/frame.hpp"

namespace turbrec::conditioning {

/// No-reference perceptual quality in (0, 1]; higher is better.
class QualityScorer {
public:
    virtual ~QualityScorer() = default;
    /// frame_id identifies the frame for scorers backed by precomputed
    /// values; analytic scorers ignore it.
    virtual double score(const Frame& frame, std::string_view frame_id = {}) const = 0;
};

/// Gradient-energy sharpness: with G the mean squared luma gradient,
/// score = (G + floor) / (G + floor + scale). Blur lowers G and the score.
class AnalyticProxy final : public QualityScorer {
public:
    explicit AnalyticProxy(double scale = 0.01, double floor = 1e-6) : scale_(scale), floor_(floor) {}
    double score(const Frame& frame, std::string_view frame_id = {}) const override;

private:
    double scale_;
    double floor_;
};

/// Scores produced offline by an external IQA model, read from a JSON
/// object mapping frame id to score. Prompt choice for CLIP-style models:
/// "quality" and "noisiness" antonym prompts track turbulence severity
/// best; how the two are combined is left to the producer of the file.
class ExternalScorer final : public QualityScorer {
public:
    explicit ExternalScorer(std::map<std::string, double> scores) : scores_(std::move(scores)) {}
    static ExternalScorer from_json_file(const std::filesystem::path& path);
    double score(const Frame& frame, std::string_view frame_id) const override;

private:
    std::map<std::string, double> scores_;
};

struct Calibration {
    double s_min = 0.05;
    double s_max = 0.95;
};

/// 1st / 99th percentile of observed scores.
Calibration calibrate(const std::vector<double>& scores);

struct TurbulenceLevel {
    double raw_score = 1.0;
    double level = 0.0;
};

/// Normalised reciprocal of the score:
/// clamp((1/s - 1/s_max) / (1/s_min - 1/s_max), 0, 1).
TurbulenceLevel level_from_score(double score, const Calibration& calibration);
TurbulenceLevel turbulence_level(const Frame& frame, const QualityScorer& scorer,
                                 const Calibration& calibration, std::string_view frame_id = {});

}  // namespace turbrec::conditioning
