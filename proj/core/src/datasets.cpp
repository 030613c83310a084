#include "turbrec/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include "turbrec/image_ops.hpp"
#include "turbrec/io.hpp"

namespace turbrec::datasets {

using nlohmann::json;

void ClipSpec::validate(int image_width, int image_height) const {
    if (crop_size <= 0) throw std::invalid_argument("crop_size must be positive");
    for (const auto& p : positions) {
        if (p.x < 0 || p.y < 0 || p.x + crop_size > image_width || p.y + crop_size > image_height) {
            throw ShapeError("clip " + clip_id + ": crop window leaves the source image");
        }
    }
}

json to_json(const ClipSpec& s) {
    json positions = json::array();
    for (const auto& p : s.positions) positions.push_back({p.x, p.y});
    json j{{"scene_id", s.scene_id},
           {"clip_id", s.clip_id},
           {"kind", s.kind == ClipKind::scan ? "scan" : "random"},
           {"crop_size", s.crop_size},
           {"start", {s.start[0], s.start[1]}},
           {"speed", s.speed},
           {"direction", {s.direction[0], s.direction[1]}},
           {"seed", s.seed},
           {"length", s.positions.size()},
           {"positions", std::move(positions)}};
    if (s.kind == ClipKind::scan) {
        j["stride"] = s.stride;
        j["densify_step"] = s.densify_step;
        j["densify_mode"] = s.densify_mode;
    }
    return j;
}

ClipSpec clip_spec_from_json(const json& j) {
    ClipSpec s;
    s.scene_id = j.at("scene_id").get<std::string>();
    s.clip_id = j.value("clip_id", std::string{});
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "scan") {
        s.kind = ClipKind::scan;
    } else if (kind == "random") {
        s.kind = ClipKind::random;
    } else {
        throw std::invalid_argument("unknown clip kind: " + kind);
    }
    s.crop_size = j.at("crop_size").get<int>();
    s.start = j.at("start").get<std::array<double, 2>>();
    s.speed = j.at("speed").get<double>();
    s.direction = j.at("direction").get<std::array<double, 2>>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& p : j.at("positions")) s.positions.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    s.stride = j.value("stride", 0);
    s.densify_step = j.value("densify_step", 0);
    s.densify_mode = j.value("densify_mode", std::string{});
    return s;
}

namespace {

std::vector<int> anchors(int extent, int stride) {
    std::vector<int> out;
    for (int v = 0; v <= extent; v += stride) out.push_back(v);
    return out;
}

void densify_segment(std::vector<CropOrigin>& path, CropOrigin to, int step) {
    const CropOrigin from = path.back();
    const int dx = to.x - from.x;
    const int dy = to.y - from.y;
    const int n = static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)) / static_cast<double>(step)));
    for (int i = 1; i <= n; ++i) {
        const CropOrigin p{from.x + static_cast<int>(std::lround(dx * static_cast<double>(i) / n)),
                           from.y + static_cast<int>(std::lround(dy * static_cast<double>(i) / n))};
        if (p != path.back()) path.push_back(p);
    }
}

double reflect_axis(double p, double& v, double max) {
    while (p < 0.0 || p > max) {
        if (p < 0.0) {
            p = -p;
            v = -v;
        } else {
            p = 2.0 * max - p;
            v = -v;
        }
    }
    return p;
}

}  // namespace

std::vector<CropOrigin> serpentine_path(int image_width, int image_height, const SerpentineOptions& opt,
                                        Rng& rng) {
    if (opt.crop_size > image_width || opt.crop_size > image_height) {
        throw ShapeError("serpentine_trajectory: crop larger than image");
    }
    if (opt.stride <= 0 || opt.densify_step <= 0) throw std::invalid_argument("stride and step must be positive");
    const auto xs = anchors(image_width - opt.crop_size, opt.stride);
    auto ys = anchors(image_height - opt.crop_size, opt.stride);
    std::shuffle(ys.begin(), ys.end(), rng);
    std::bernoulli_distribution coin(0.5);

    std::vector<CropOrigin> path;
    for (int y : ys) {
        const bool forward = coin(rng);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const int x = forward ? xs[i] : xs[xs.size() - 1 - i];
            const CropOrigin anchor{x, y};
            if (path.empty()) {
                path.push_back(anchor);
            } else {
                densify_segment(path, anchor, opt.densify_step);
            }
        }
    }
    return path;
}

std::vector<std::vector<CropOrigin>> split_path(const std::vector<CropOrigin>& path, Rng& rng) {
    const std::size_t len = path.size();
    if (len < 5) return {path};
    std::uniform_int_distribution<int> count_dist(3, 5);
    const auto n = static_cast<std::size_t>(count_dist(rng));

    std::vector<std::size_t> cuts;
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::set<std::size_t> chosen;
        std::uniform_int_distribution<std::size_t> cut_dist(1, len - 1);
        while (chosen.size() < n - 1) chosen.insert(cut_dist(rng));
        cuts.assign(chosen.begin(), chosen.end());
        std::set<std::size_t> lengths;
        std::size_t prev = 0;
        for (auto c : cuts) {
            lengths.insert(c - prev);
            prev = c;
        }
        lengths.insert(len - prev);
        if (lengths.size() == n) break;  // all pieces differ in length
    }
    std::vector<std::vector<CropOrigin>> pieces;
    std::size_t prev = 0;
    cuts.push_back(len);
    for (auto c : cuts) {
        pieces.emplace_back(path.begin() + static_cast<std::ptrdiff_t>(prev),
                            path.begin() + static_cast<std::ptrdiff_t>(c));
        prev = c;
    }
    return pieces;
}

std::vector<ClipSpec> serpentine_trajectory(int image_width, int image_height, const SerpentineOptions& opt,
                                            Rng& rng) {
    const auto path = serpentine_path(image_width, image_height, opt, rng);
    std::vector<ClipSpec> specs;
    for (auto& piece : split_path(path, rng)) {
        ClipSpec s;
        s.kind = ClipKind::scan;
        s.crop_size = opt.crop_size;
        s.start = {static_cast<double>(piece.front().x), static_cast<double>(piece.front().y)};
        s.speed = opt.densify_step;
        if (piece.size() > 1) {
            const double dx = piece[1].x - piece[0].x;
            const double dy = piece[1].y - piece[0].y;
            const double norm = std::hypot(dx, dy);
            s.direction = {dx / norm, dy / norm};
        }
        s.stride = opt.stride;
        s.densify_step = opt.densify_step;
        s.densify_mode = "full_path";
        s.positions = std::move(piece);
        specs.push_back(std::move(s));
    }
    return specs;
}

std::vector<CropOrigin> reflect_trajectory(std::array<double, 2> start, std::array<double, 2> velocity,
                                           std::size_t length, double max_x, double max_y) {
    std::vector<CropOrigin> out;
    out.reserve(length);
    double px = reflect_axis(start[0], velocity[0], max_x);
    double py = reflect_axis(start[1], velocity[1], max_y);
    for (std::size_t t = 0; t < length; ++t) {
        if (t > 0) {
            px = reflect_axis(px + velocity[0], velocity[0], max_x);
            py = reflect_axis(py + velocity[1], velocity[1], max_y);
        }
        out.push_back({static_cast<int>(std::lround(px)), static_cast<int>(std::lround(py))});
    }
    return out;
}

ClipSpec random_trajectory(int image_width, int image_height, const RandomTrajectoryOptions& opt, Rng& rng) {
    if (image_width <= opt.crop_size || image_height <= opt.crop_size) {
        throw ShapeError("random_trajectory: image must be strictly larger than the crop");
    }
    const double max_x = image_width - opt.crop_size;
    const double max_y = image_height - opt.crop_size;
    std::uniform_int_distribution<int> len_dist(opt.min_length, opt.max_length);
    std::uniform_real_distribution<double> speed_dist(opt.min_speed, opt.max_speed);
    std::uniform_real_distribution<double> angle_dist(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> sx(0.0, max_x);
    std::uniform_real_distribution<double> sy(0.0, max_y);

    ClipSpec s;
    s.kind = ClipKind::random;
    s.crop_size = opt.crop_size;
    const auto length = static_cast<std::size_t>(len_dist(rng));
    s.speed = speed_dist(rng);
    const double angle = angle_dist(rng);
    s.direction = {std::cos(angle), std::sin(angle)};
    s.start = {sx(rng), sy(rng)};
    s.positions = reflect_trajectory(s.start, {s.speed * s.direction[0], s.speed * s.direction[1]}, length,
                                     max_x, max_y);
    return s;
}

namespace {

void check_sources(std::size_t turbulent_length, const Frame& first, const Frame& pseudo_clean,
                   const ClipSpec& spec) {
    if (turbulent_length < spec.length()) {
        throw std::invalid_argument("clip " + spec.clip_id + " needs " + std::to_string(spec.length()) +
                                    " frames, sequence has " + std::to_string(turbulent_length));
    }
    if (first.height() != pseudo_clean.height() || first.width() != pseudo_clean.width()) {
        throw ShapeError("pseudo-clean reference resolution differs from the turbulent frames");
    }
    spec.validate(pseudo_clean.width(), pseudo_clean.height());
}

}  // namespace

PairedClip cut_paired_clip(const VideoSequence& turbulent, const Frame& pseudo_clean, const ClipSpec& spec) {
    turbulent.validate();
    check_sources(turbulent.length(), turbulent.frames.front(), pseudo_clean, spec);
    PairedClip clip;
    clip.spec = spec;
    clip.degraded.id = spec.scene_id + "/" + spec.clip_id + "/degraded";
    clip.clean.id = spec.scene_id + "/" + spec.clip_id + "/clean";
    clip.degraded.frame_rate = clip.clean.frame_rate = turbulent.frame_rate;
    for (std::size_t t = 0; t < spec.length(); ++t) {
        const auto [x, y] = spec.positions[t];
        clip.degraded.frames.push_back(crop(turbulent.frames[t], x, y, spec.crop_size, spec.crop_size));
        clip.clean.frames.push_back(crop(pseudo_clean, x, y, spec.crop_size, spec.crop_size));
    }
    return clip;
}

void cut_and_write_clip(const FrameSource& turbulent, std::size_t turbulent_length, const Frame& pseudo_clean,
                        const ClipSpec& spec, const fs::path& dir) {
    if (spec.length() == 0) throw std::invalid_argument("empty clip spec");
    const Frame first = turbulent(0);
    check_sources(turbulent_length, first, pseudo_clean, spec);
    fs::create_directories(dir / "degraded");
    fs::create_directories(dir / "clean");
    for (std::size_t t = 0; t < spec.length(); ++t) {
        const Frame src = t == 0 ? first : turbulent(t);
        if (src.height() != pseudo_clean.height() || src.width() != pseudo_clean.width()) {
            throw ShapeError("turbulent frame " + std::to_string(t) + " has a different resolution");
        }
        const auto [x, y] = spec.positions[t];
        io::write_png(dir / "degraded" / io::frame_name(t), crop(src, x, y, spec.crop_size, spec.crop_size));
        io::write_png(dir / "clean" / io::frame_name(t), crop(pseudo_clean, x, y, spec.crop_size, spec.crop_size));
    }
    std::ofstream(dir / "spec.json") << to_json(spec).dump(2) << '\n';
}

std::size_t normalize_to_dominant(std::vector<Frame>& frames) {
    if (frames.empty()) return 0;
    std::map<std::pair<int, int>, std::size_t> counts;
    std::vector<std::pair<int, int>> order;
    for (const auto& f : frames) {
        const std::pair key{f.height(), f.width()};
        if (counts[key]++ == 0) order.push_back(key);
    }
    auto dominant = order.front();
    for (const auto& key : order) {
        if (counts[key] > counts[dominant]) dominant = key;
    }
    std::size_t affected = 0;
    for (auto& f : frames) {
        if (f.height() != dominant.first || f.width() != dominant.second) {
            f = resize_bilinear(f, dominant.first, dominant.second);
            ++affected;
        }
    }
    return affected;
}

std::vector<ClipSpec> plan_scene(const std::string& scene_id, int image_width, int image_height,
                                 const SceneOptions& options, Rng& rng) {
    auto specs = serpentine_trajectory(image_width, image_height, options.scan, rng);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        specs[i].clip_id = "scan_" + std::to_string(i);
    }
    for (int i = 0; i < options.n_random; ++i) {
        auto s = random_trajectory(image_width, image_height, options.random, rng);
        s.clip_id = "random_" + std::to_string(i);
        specs.push_back(std::move(s));
    }
    const std::uint64_t scene_seed = rng();
    for (auto& s : specs) {
        s.scene_id = scene_id;
        s.seed = scene_seed;
    }
    return specs;
}

std::vector<PairedClip> build_scene(const VideoSequence& turbulent, const Frame& pseudo_clean, Rng& rng,
                                    const SceneOptions& options) {
    turbulent.validate();
    const auto specs = plan_scene(turbulent.id, pseudo_clean.width(), pseudo_clean.height(), options, rng);
    std::vector<PairedClip> clips;
    clips.reserve(specs.size());
    for (const auto& s : specs) clips.push_back(cut_paired_clip(turbulent, pseudo_clean, s));
    return clips;
}

SceneSplit split_scenes(std::vector<std::string> scene_ids, std::uint64_t seed, double val_fraction) {
    std::sort(scene_ids.begin(), scene_ids.end());
    scene_ids.erase(std::unique(scene_ids.begin(), scene_ids.end()), scene_ids.end());
    auto rng = make_rng(seed, {0x5917});
    std::shuffle(scene_ids.begin(), scene_ids.end(), rng);
    std::size_t n_val = 0;
    if (scene_ids.size() >= 2) {
        n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(val_fraction * scene_ids.size())));
        n_val = std::min(n_val, scene_ids.size() - 1);
    }
    SceneSplit split;
    split.val.assign(scene_ids.begin(), scene_ids.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.assign(scene_ids.begin() + static_cast<std::ptrdiff_t>(n_val), scene_ids.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.val.begin(), split.val.end());
    return split;
}

void write_clip(const fs::path& dir, const PairedClip& clip) {
    io::write_video(dir / "degraded", clip.degraded);
    io::write_video(dir / "clean", clip.clean);
    std::ofstream(dir / "spec.json") << to_json(clip.spec).dump(2) << '\n';
}

PairedClip read_clip(const fs::path& dir) {
    PairedClip clip;
    clip.degraded = io::read_video(dir / "degraded");
    clip.clean = io::read_video(dir / "clean");
    if (clip.degraded.length() != clip.clean.length() ||
        !clip.degraded.frames.front().same_shape(clip.clean.frames.front())) {
        throw ShapeError("degraded and clean sequences differ in " + dir.string());
    }
    if (fs::exists(dir / "spec.json")) {
        std::ifstream in(dir / "spec.json");
        clip.spec = clip_spec_from_json(json::parse(in));
    } else {
        clip.spec.scene_id = dir.parent_path().filename().string();
        clip.spec.clip_id = dir.filename().string();
    }
    return clip;
}

std::vector<fs::path> find_clip_dirs(const fs::path& root) {
    std::vector<fs::path> out;
    if (fs::is_directory(root / "degraded") && fs::is_directory(root / "clean")) out.push_back(root);
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const auto& p = entry.path();
        if (fs::is_directory(p / "degraded") && fs::is_directory(p / "clean")) out.push_back(p);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace turbrec::datasets
