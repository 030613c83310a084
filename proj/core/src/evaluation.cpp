#include "turbrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "turbrec/image_ops.hpp"
#include "turbrec/io.hpp"
#include "turbrec/metrics.hpp"

namespace turbrec::eval {

using nlohmann::json;

std::string label_name(MotionLabel label) { return label == MotionLabel::slow ? "slow" : "fast"; }

double mean_displacement(const VideoSequence& clip, const ClassicFlowOptions& options) {
    clip.validate();
    if (clip.length() < 2) return 0.0;
    double s = 0.0;
    for (std::size_t t = 1; t < clip.length(); ++t) {
        s += estimate_flow_classic(clip.frames[t - 1], clip.frames[t], options).mean_magnitude();
    }
    return s / static_cast<double>(clip.length() - 1);
}

MotionBins motion_bin(const std::vector<std::pair<std::string, double>>& displacements,
                      std::optional<double> threshold) {
    if (displacements.empty()) throw std::invalid_argument("motion_bin needs at least one clip");
    MotionBins bins;
    if (threshold) {
        if (!(*threshold > 0.0)) throw std::invalid_argument("motion threshold must be > 0");
        bins.threshold = *threshold;
    } else {
        std::vector<double> d;
        for (const auto& [id, v] : displacements) d.push_back(v);
        // A median of zero (mostly static sets) would make the bin
        // threshold non-positive; keep it strictly positive.
        bins.threshold = std::max(percentile(d, 50.0), 1e-9);
    }
    for (const auto& [id, v] : displacements) (v <= bins.threshold ? bins.slow : bins.fast).push_back(id);
    return bins;
}

MotionBins motion_bin(const std::vector<VideoSequence>& clips, std::optional<double> threshold) {
    std::vector<std::pair<std::string, double>> d;
    d.reserve(clips.size());
    for (const auto& c : clips) d.emplace_back(c.id, mean_displacement(c));
    return motion_bin(d, threshold);
}

PerceptualTable read_perceptual_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw io::IoError("cannot open perceptual table " + path.string());
    const json j = json::parse(in);
    PerceptualTable table;
    for (const auto& [id, entry] : j.items()) {
        PerceptualEntry e;
        if (entry.contains("frame")) e.frame = entry.at("frame").get<std::vector<double>>();
        if (entry.contains("temporal")) e.temporal = entry.at("temporal").get<std::vector<double>>();
        table.emplace(id, std::move(e));
    }
    return table;
}

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

json number_or_inf(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double read_number(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return kInfinitePsnr;
        if (s == "-inf") return -kInfinitePsnr;
        throw std::invalid_argument("unexpected metric string '" + s + "'");
    }
    return j.get<double>();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

json aggregate_json(const Aggregate& a) {
    return {{"clips", a.clips},
            {"psnr", number_or_inf(a.psnr)},
            {"ssim", a.ssim},
            {"perceptual", optional_json(a.perceptual)},
            {"temporal", optional_json(a.temporal)}};
}

Aggregate aggregate_from_json(const json& j) {
    Aggregate a;
    a.clips = j.at("clips").get<std::size_t>();
    a.psnr = read_number(j.at("psnr"));
    a.ssim = j.at("ssim").get<double>();
    a.perceptual = read_optional(j, "perceptual");
    a.temporal = read_optional(j, "temporal");
    return a;
}

}  // namespace

Aggregate aggregate(const std::vector<const ClipMetrics*>& clips) {
    Aggregate a;
    a.clips = clips.size();
    if (clips.empty()) return a;
    std::vector<double> p, s, lp, tp;
    for (const auto* c : clips) {
        p.push_back(c->psnr);
        s.push_back(c->ssim);
        if (c->perceptual) lp.push_back(*c->perceptual);
        if (c->temporal) tp.push_back(*c->temporal);
    }
    a.psnr = mean_of(p);
    a.ssim = mean_of(s);
    if (lp.size() == clips.size()) a.perceptual = mean_of(lp);
    if (!tp.empty()) a.temporal = mean_of(tp);
    return a;
}

void to_json(json& j, const MetricReport& r) {
    json clips = json::array();
    for (const auto& c : r.clips) {
        clips.push_back({{"id", c.id},
                         {"frames", c.frames},
                         {"psnr", number_or_inf(c.psnr)},
                         {"ssim", c.ssim},
                         {"perceptual", optional_json(c.perceptual)},
                         {"temporal", optional_json(c.temporal)},
                         {"temporal_source", c.temporal_source},
                         {"displacement", c.displacement},
                         {"bin", c.bin ? json(label_name(*c.bin)) : json(nullptr)}});
    }
    json bins = json::object();
    for (const auto& [name, a] : r.bins) bins[name] = aggregate_json(a);
    j = {{"schema_version", r.schema_version},
         {"clips", clips},
         {"aggregate", aggregate_json(r.aggregate)},
         {"bins", bins},
         {"bin_threshold", optional_json(r.bin_threshold)},
         {"missing", r.missing}};
}

void from_json(const json& j, MetricReport& r) {
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
        throw std::invalid_argument("unsupported report schema version " + std::to_string(r.schema_version));
    }
    r.clips.clear();
    for (const auto& c : j.at("clips")) {
        ClipMetrics m;
        m.id = c.at("id").get<std::string>();
        m.frames = c.at("frames").get<std::size_t>();
        m.psnr = read_number(c.at("psnr"));
        m.ssim = c.at("ssim").get<double>();
        m.perceptual = read_optional(c, "perceptual");
        m.temporal = read_optional(c, "temporal");
        m.temporal_source = c.at("temporal_source").get<std::string>();
        m.displacement = c.at("displacement").get<double>();
        if (!c.at("bin").is_null()) {
            m.bin = c.at("bin").get<std::string>() == "slow" ? MotionLabel::slow : MotionLabel::fast;
        }
        r.clips.push_back(std::move(m));
    }
    r.aggregate = aggregate_from_json(j.at("aggregate"));
    r.bins.clear();
    for (const auto& [name, a] : j.at("bins").items()) r.bins[name] = aggregate_from_json(a);
    r.bin_threshold = read_optional(j, "bin_threshold");
    r.missing = j.at("missing").get<std::vector<std::string>>();
}

void write_report(const fs::path& path, const MetricReport& report) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw io::IoError("cannot write " + path.string());
    out << json(report).dump(2) << '\n';
}

MetricReport read_report(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw io::IoError("cannot open " + path.string());
    return json::parse(in).get<MetricReport>();
}

std::string MetricReport::table() const {
    std::ostringstream os;
    auto fmt = [](std::optional<double> v) {
        std::ostringstream s;
        if (v) s << std::fixed << std::setprecision(4) << *v;
        else s << "-";
        return s.str();
    };
    os << std::left << std::setw(28) << "clip" << std::right << std::setw(10) << "PSNR" << std::setw(9) << "SSIM"
       << std::setw(9) << "LPIPS" << std::setw(9) << "tDist" << std::setw(8) << "disp" << std::setw(6) << "bin"
       << '\n';
    auto row = [&](const std::string& name, double p, double s, std::optional<double> lp, std::optional<double> tp,
                   std::optional<double> disp, const std::string& bin) {
        os << std::left << std::setw(28) << name << std::right << std::setw(10) << fmt(p) << std::setw(9) << fmt(s)
           << std::setw(9) << fmt(lp) << std::setw(9) << fmt(tp) << std::setw(8) << fmt(disp) << std::setw(6) << bin
           << '\n';
    };
    for (const auto& c : clips) {
        row(c.id, c.psnr, c.ssim, c.perceptual, c.temporal, c.displacement, c.bin ? label_name(*c.bin) : "");
    }
    row("[mean]", aggregate.psnr, aggregate.ssim, aggregate.perceptual, aggregate.temporal, std::nullopt, "");
    for (const auto& [name, a] : bins) {
        row("[" + name + "]", a.psnr, a.ssim, a.perceptual, a.temporal, std::nullopt, "");
    }
    for (const auto& m : missing) os << "missing restored clip: " << m << '\n';
    return os.str();
}

MetricReport evaluate(const std::vector<VideoSequence>& restored, const std::vector<VideoSequence>& reference,
                      const EvalOptions& options) {
    if (restored.size() != reference.size()) throw std::invalid_argument("evaluate: clip counts differ");
    MetricReport report;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const auto& out = restored[i];
        const auto& ref = reference[i];
        ClipMetrics m;
        m.id = ref.id;
        m.frames = ref.length();
        m.psnr = mean_psnr(out, ref);
        m.ssim = mean_ssim(out, ref);
        const PerceptualEntry* entry = nullptr;
        if (options.perceptual) {
            const auto it = options.perceptual->find(ref.id);
            if (it != options.perceptual->end()) entry = &it->second;
        }
        if (entry != nullptr && !entry->frame.empty()) m.perceptual = mean_of(entry->frame);
        if (entry != nullptr && !entry->temporal.empty()) {
            m.temporal = mean_of(entry->temporal);
            m.temporal_source = "table";
        } else if (ref.length() >= 2) {
            m.temporal = temporal_perceptual(out, ref);
            m.temporal_source = "l1";
        }
        if (options.bins) m.displacement = mean_displacement(ref);
        report.clips.push_back(std::move(m));
    }
    std::vector<const ClipMetrics*> all;
    for (const auto& c : report.clips) all.push_back(&c);
    report.aggregate = aggregate(all);

    if (options.bins && !report.clips.empty()) {
        std::vector<std::pair<std::string, double>> d;
        for (const auto& c : report.clips) d.emplace_back(c.id, c.displacement);
        const auto bins = motion_bin(d, options.bin_threshold);
        report.bin_threshold = bins.threshold;
        std::vector<const ClipMetrics*> slow, fast;
        for (auto& c : report.clips) {
            c.bin = c.displacement <= bins.threshold ? MotionLabel::slow : MotionLabel::fast;
            (*c.bin == MotionLabel::slow ? slow : fast).push_back(&c);
        }
        report.bins["slow"] = aggregate(slow);
        report.bins["fast"] = aggregate(fast);
    }
    return report;
}

namespace {

struct RefClip {
    fs::path rel;
    fs::path frames;
};

std::vector<RefClip> discover_references(const fs::path& root) {
    std::vector<RefClip> out;
    auto consider = [&](const fs::path& dir) -> bool {
        if (io::is_video_dir(dir / "clean") && fs::is_directory(dir / "degraded")) {
            out.push_back({fs::relative(dir, root), dir / "clean"});
            return true;
        }
        if (io::is_video_dir(dir)) {
            out.push_back({fs::relative(dir, root), dir});
            return true;
        }
        return false;
    };
    if (consider(root)) return out;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (!it->is_directory()) continue;
        if (consider(it->path())) it.disable_recursion_pending();
    }
    std::sort(out.begin(), out.end(), [](const RefClip& a, const RefClip& b) { return a.rel < b.rel; });
    return out;
}

}  // namespace

MetricReport evaluate(const fs::path& restored_dir, const fs::path& reference_dir, const EvalOptions& options) {
    std::vector<VideoSequence> restored, reference;
    std::vector<std::string> missing;
    for (const auto& ref : discover_references(reference_dir)) {
        const fs::path candidate = restored_dir / ref.rel;
        const std::string id = ref.rel == "." ? reference_dir.filename().string() : ref.rel.generic_string();
        if (!io::is_video_dir(candidate)) {
            missing.push_back(id);
            continue;
        }
        auto r = io::read_video(candidate);
        auto t = io::read_video(ref.frames);
        if (r.length() != t.length()) {
            missing.push_back(id);
            continue;
        }
        r.id = id;
        t.id = id;
        restored.push_back(std::move(r));
        reference.push_back(std::move(t));
    }
    auto report = evaluate(restored, reference, options);
    report.missing = std::move(missing);
    return report;
}

}  // namespace turbrec::eval
