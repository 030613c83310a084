#include "turbrec/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "turbrec/image_ops.hpp"

namespace turbrec::conditioning {

double AnalyticProxy::score(const Frame& frame, std::string_view) const {
    const Plane g = gradient_magnitude(to_gray(frame));
    double energy = 0.0;
    for (double v : g.data()) energy += v * v;
    energy /= static_cast<double>(g.size());
    return (energy + floor_) / (energy + floor_ + scale_);
}

ExternalScorer ExternalScorer::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open score file " + path.string());
    const auto j = nlohmann::json::parse(in);
    return ExternalScorer(j.get<std::map<std::string, double>>());
}

double ExternalScorer::score(const Frame&, std::string_view frame_id) const {
    const auto it = scores_.find(std::string(frame_id));
    if (it == scores_.end()) {
        throw std::out_of_range("no external quality score for frame '" + std::string(frame_id) + "'");
    }
    return it->second;
}

Calibration calibrate(const std::vector<double>& scores) {
    if (scores.empty()) return {};
    Calibration c{percentile(scores, 1.0), percentile(scores, 99.0)};
    if (!(c.s_min > 0.0)) c.s_min = std::max(1e-6, c.s_max * 1e-3);
    if (c.s_max - c.s_min < 1e-9) {
        c.s_min = std::max(1e-6, c.s_min * 0.5);
        c.s_max = std::min(1.0, c.s_max * 1.5 + 1e-6);
    }
    return c;
}

TurbulenceLevel level_from_score(double score, const Calibration& cal) {
    if (!(score > 0.0)) throw std::domain_error("quality score must be positive");
    if (!(cal.s_min > 0.0 && cal.s_min < cal.s_max)) {
        throw std::invalid_argument("calibration requires 0 < s_min < s_max");
    }
    const double num = 1.0 / score - 1.0 / cal.s_max;
    const double den = 1.0 / cal.s_min - 1.0 / cal.s_max;
    return {score, std::clamp(num / den, 0.0, 1.0)};
}

TurbulenceLevel turbulence_level(const Frame& frame, const QualityScorer& scorer, const Calibration& cal,
                                 std::string_view frame_id) {
    return level_from_score(scorer.score(frame, frame_id), cal);
}

}  // namespace turbrec::conditioning
