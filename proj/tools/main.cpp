#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include "turbrec/checkpoint.hpp"
#include "turbrec/config.hpp"
#include "turbrec/datasets.hpp"
#include "turbrec/evaluation.hpp"
#include "turbrec/image_ops.hpp"
#include "turbrec/io.hpp"
#include "turbrec/matf.hpp"
#include "turbrec/metrics.hpp"
#include "turbrec/optical_flow.hpp"
#include "turbrec/pipeline.hpp"
#include "turbrec/rng.hpp"
#include "turbrec/trainer.hpp"
#include "turbrec/turbsim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace turbrec;

namespace {

void log(const std::string& msg) { std::cerr << "[turbrec] " << msg << '\n'; }

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw io::IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::uint64_t name_hash(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// A directory argument may be one frame directory, a dataset clip directory
// (degraded/ + clean/) or a tree of either. Returns (relative id, frames dir)
// pairs; `prefer` picks the side of a clip directory.
std::vector<std::pair<fs::path, fs::path>> video_dirs(const fs::path& root, const std::string& prefer) {
    std::vector<std::pair<fs::path, fs::path>> out;
    const auto visit = [&](const fs::path& dir) {
        if (io::is_video_dir(dir)) {
            out.emplace_back(fs::relative(dir, root), dir);
            return true;
        }
        if (io::is_video_dir(dir / prefer)) {
            out.emplace_back(fs::relative(dir, root), dir / prefer);
            return true;
        }
        return false;
    };
    if (!fs::is_directory(root)) throw io::IoError("not a directory: " + root.string());
    if (visit(root)) return out;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_directory() && visit(it->path())) it.disable_recursion_pending();
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) v.push_back(std::stod(item));
    }
    return v;
}

std::string weight_tag(double w) {
    std::ostringstream os;
    os << w;
    return os.str();
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
    fs::path clean, out, presets;
    std::string level = "medium";
    std::uint64_t seed = 0;
};

int run_simulate(const SimulateArgs& a) {
    turbsim::TurbulenceParams params;
    const auto level = turbsim::parse_level(a.level);
    if (a.presets.empty()) {
        params = turbsim::preset(level, a.seed);
    } else {
        const auto table = turbsim::load_presets(a.presets);
        const auto it = table.presets.find(turbsim::level_name(level));
        if (it == table.presets.end()) throw std::invalid_argument("preset '" + a.level + "' not in " + a.presets.string());
        params = it->second;
        params.seed = a.seed;
    }
    const auto videos = video_dirs(a.clean, "clean");
    if (videos.empty()) throw io::IoError("no frame directories under " + a.clean.string());
    for (const auto& [rel, dir] : videos) {
        const auto clean = io::read_video(dir);
        auto [degraded, reference] = turbsim::make_paired_clip(clean, params);
        const fs::path dst = rel == "." ? a.out : a.out / rel;
        io::write_video(dst / "degraded", degraded);
        io::write_video(dst / "clean", reference);
        write_json(dst / "turbulence.json", {{"level", turbsim::level_name(level)},
                                             {"seed", params.seed},
                                             {"tilt_sigma", params.tilt_sigma},
                                             {"tilt_corr_length", params.tilt_corr_length},
                                             {"blur_sigma_min", params.blur_sigma_min},
                                             {"blur_sigma_max", params.blur_sigma_max},
                                             {"intensity_jitter", params.intensity_jitter},
                                             {"temporal_corr", params.temporal_corr}});
        log("simulated " + dst.string() + " (" + std::to_string(clean.length()) + " frames, " +
            turbsim::level_name(level) + ")");
    }
    return 0;
}

// ---- build-dataset ----------------------------------------------------------

struct BuildArgs {
    fs::path scenes, out;
    std::uint64_t seed = 0;
    int n_random = 10;
    int crop = 256;
};

fs::path find_reference(const fs::path& scene) {
    for (const char* name : {"pseudo_clean.png", "reference.png", "clean.png"}) {
        if (fs::is_regular_file(scene / name)) return scene / name;
    }
    throw io::IoError("scene " + scene.string() + " has no pseudo_clean.png");
}

int run_build_dataset(const BuildArgs& a) {
    std::vector<fs::path> scenes;
    for (const auto& e : fs::directory_iterator(a.scenes)) {
        if (e.is_directory() && io::is_video_dir(e.path() / "turbulent")) scenes.push_back(e.path());
    }
    std::sort(scenes.begin(), scenes.end());
    if (scenes.empty()) throw io::IoError("no <scene>/turbulent/ directories under " + a.scenes.string());

    datasets::SceneOptions options;
    options.n_random = a.n_random;
    options.scan.crop_size = a.crop;
    options.random.crop_size = a.crop;
    std::vector<std::string> ids;
    std::size_t total_clips = 0, total_frames = 0;
    for (const auto& scene : scenes) {
        const std::string id = scene.filename().string();
        auto turbulent = io::read_video(scene / "turbulent");
        turbulent.id = id;
        if (const auto n = datasets::normalize_to_dominant(turbulent.frames); n > 0) {
            log(id + ": resized " + std::to_string(n) + " frames to the dominant resolution");
        }
        auto reference = io::read_png(find_reference(scene));
        const auto& f0 = turbulent.frames.front();
        if (reference.width() != f0.width() || reference.height() != f0.height()) {
            reference = resize_bilinear(reference, f0.height(), f0.width());
        }
        auto rng = make_rng(a.seed, {name_hash(id)});
        const auto specs = datasets::plan_scene(id, f0.width(), f0.height(), options, rng);
        const datasets::FrameSource source = [&](std::size_t t) { return turbulent.frames[t]; };
        for (const auto& spec : specs) {
            datasets::cut_and_write_clip(source, turbulent.length(), reference, spec, a.out / id / spec.clip_id);
            total_frames += spec.length();
        }
        total_clips += specs.size();
        ids.push_back(id);
        log(id + ": " + std::to_string(specs.size()) + " clips");
    }
    const auto split = datasets::split_scenes(ids, a.seed);
    write_json(a.out / "split.json", {{"seed", a.seed}, {"train", split.train}, {"val", split.val}});
    log("wrote " + std::to_string(total_clips) + " clips, " + std::to_string(total_frames) + " frames to " +
        a.out.string());
    return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
    fs::path data, config, out, resume;
    std::string ablation;
    std::optional<std::int64_t> max_steps;
    std::optional<int> epochs;
};

int run_train(const TrainArgs& a) {
    ProjectConfig cfg = a.config.empty() ? ProjectConfig{} : load_config(a.config);
    if (a.max_steps) cfg.train.max_steps = *a.max_steps;
    if (a.epochs) cfg.train.epochs = *a.epochs;
    auto [train_clips, val_clips] = trainer::load_dataset(a.data, cfg.train.seed);
    // A split.json written by build-dataset takes precedence over the seeded split.
    if (fs::is_regular_file(a.data / "split.json") && !fs::is_directory(a.data / "train")) {
        const auto j = json::parse(std::ifstream(a.data / "split.json"));
        const auto val_ids = j.at("val").get<std::vector<std::string>>();
        std::vector<datasets::PairedClip> all;
        for (auto* v : {&train_clips, &val_clips})
            for (auto& c : *v) all.push_back(std::move(c));
        train_clips.clear();
        val_clips.clear();
        for (auto& c : all) {
            const bool is_val = std::find(val_ids.begin(), val_ids.end(), c.spec.scene_id) != val_ids.end();
            (is_val ? val_clips : train_clips).push_back(std::move(c));
        }
    }
    if (train_clips.empty()) throw std::invalid_argument("no training clips under " + a.data.string());
    log(std::to_string(train_clips.size()) + " training clips, " + std::to_string(val_clips.size()) +
        " validation clips");

    if (a.ablation == "all") {
        const auto report = trainer::run_ablation(train_clips, val_clips, cfg.pipeline, cfg.train, a.out);
        std::cout << report.table();
        write_json(a.out / "ablation_report.json", report.to_json());
        return 0;
    }
    if (!a.ablation.empty()) cfg.train.ablation = parse_ablation(a.ablation);

    trainer::Trainer t(cfg.pipeline, cfg.train);
    if (!a.resume.empty()) {
        t.resume(a.resume);
        log("resumed at step " + std::to_string(t.step()));
    }
    trainer::TrainOptions opts;
    opts.out_dir = a.out;
    opts.on_step = [](const trainer::LogEntry& e) {
        if (e.step % 50 == 0) {
            std::ostringstream os;
            os << "step " << e.step << " epoch " << e.epoch << " loss " << std::setprecision(5) << e.total
               << (e.skipped ? " (skipped)" : "");
            log(os.str());
        }
    };
    opts.on_epoch = [](int epoch, const trainer::ValMetrics& v) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(3) << "epoch " << epoch << " val psnr " << v.psnr << " dB (input "
           << v.input_psnr << ") ssim " << std::setprecision(4) << v.ssim;
        log(os.str());
    };
    const auto r = t.train(train_clips, val_clips, opts);
    log("finished " + std::to_string(r.steps) + " steps; best epoch " + std::to_string(r.best_epoch) +
        (r.skipped_steps ? ", skipped " + std::to_string(r.skipped_steps) + " non-finite steps" : ""));
    if (r.filter) {
        log("learnability filter kept " + std::to_string(r.filter->kept.size()) + ", dropped " +
            std::to_string(r.filter->dropped.size()));
    }
    return 0;
}

// ---- restore ----------------------------------------------------------------

struct RestoreArgs {
    fs::path input, checkpoint, out;
    std::string level = "auto";
    bool trace = false;
};

int run_restore(const RestoreArgs& a) {
    checkpoint::CheckpointInfo info;
    auto model = checkpoint::load_model(a.checkpoint, &info);
    const auto pipeline = apply_ablation(info.config.pipeline, info.config.train.ablation);
    RecurrentRestorer restorer(model, pipeline);

    std::unique_ptr<conditioning::QualityScorer> scorer;
    LevelSource levels;
    if (a.level != "auto") {
        levels.fixed = std::stod(a.level);
        if (*levels.fixed < 0.0 || *levels.fixed > 1.0) throw std::invalid_argument("--level must be in [0, 1]");
    } else {
        const auto& c = pipeline.conditioning;
        if (c.scorer == "external") {
            scorer = std::make_unique<conditioning::ExternalScorer>(
                conditioning::ExternalScorer::from_json_file(c.external_scores));
        } else {
            scorer = std::make_unique<conditioning::AnalyticProxy>(c.proxy_scale);
        }
        levels.scorer = scorer.get();
        if (info.metrics.contains("calibration")) {
            levels.calibration = {info.metrics["calibration"].at("s_min").get<double>(),
                                  info.metrics["calibration"].at("s_max").get<double>()};
        } else if (c.calibration) {
            levels.calibration = *c.calibration;
        }
    }

    const auto videos = video_dirs(a.input, "degraded");
    if (videos.empty()) throw io::IoError("no frame directories under " + a.input.string());
    for (const auto& [rel, dir] : videos) {
        auto input = io::read_video(dir);
        input.id = rel == "." ? dir.filename().string() : rel.string();
        RestoreTrace trace;
        auto out = restorer.restore(input, levels, a.trace ? &trace : nullptr);
        const fs::path dst = rel == "." ? a.out : a.out / rel;
        io::write_video(dst, out);
        if (a.trace) {
            for (std::size_t t = 0; t < trace.motion_maps.size(); ++t) {
                if (trace.motion_maps[t].size() > 0) io::write_png(dst / "motion" / io::frame_name(t), trace.motion_maps[t]);
            }
            write_json(dst / "levels.json", trace.levels);
        }
        log("restored " + input.id + " (" + std::to_string(out.length()) + " frames)");
    }
    return 0;
}

// ---- fuse-analysis ----------------------------------------------------------

struct FuseArgs {
    fs::path clip, reference, out;
    std::string mode = "fixed";
    std::string weights = "0.1,0.25,0.5";
    bool history_weights = false;
    std::optional<int> column;
};

int run_fuse_analysis(const FuseArgs& a) {
    const auto input_dir = io::is_video_dir(a.clip) ? a.clip : a.clip / "degraded";
    const auto estimates = io::read_video(input_dir);
    std::optional<VideoSequence> reference;
    if (!a.reference.empty()) reference = io::read_video(a.reference);
    else if (io::is_video_dir(a.clip / "clean")) reference = io::read_video(a.clip / "clean");
    const int column = a.column.value_or(estimates.frames.front().width() / 2);

    json summary{{"clip", a.clip.string()}, {"column", column}, {"mode", a.mode}, {"runs", json::array()}};
    const auto input_yt = eval::yt_plane(estimates, column);
    io::write_png(a.out / "yt_input.png", input_yt);
    summary["input_tv"] = eval::column_total_variation(input_yt);

    const auto record = [&](const std::string& tag, const VideoSequence& fused, json extra) {
        io::write_video(a.out / tag, fused);
        const auto yt = eval::yt_plane(fused, column);
        io::write_png(a.out / ("yt_" + tag + ".png"), yt);
        extra["tag"] = tag;
        extra["tv"] = eval::column_total_variation(yt);
        if (reference) extra["psnr"] = eval::mean_psnr(fused, *reference);
        std::ostringstream os;
        os << tag << ": y-t column TV " << std::setprecision(6) << extra["tv"].get<double>();
        if (reference) os << ", PSNR " << std::fixed << std::setprecision(3) << extra["psnr"].get<double>() << " dB";
        std::cout << os.str() << '\n';
        summary["runs"].push_back(extra);
    };

    if (a.mode == "fixed") {
        for (double w : parse_list(a.weights)) {
            const double m = a.history_weights ? matf::current_weight_from_history(w) : w;
            if (m < 0.0 || m > 1.0) throw std::invalid_argument("fusion weights must lie in [0, 1]");
            auto fused = matf::fixed_fusion_clip(estimates, m);
            fused.id = estimates.id + "/M" + weight_tag(m);
            record("M_" + weight_tag(m), fused, {{"M", m}, {"history_weight", 1.0 - m}});
        }
    } else if (a.mode == "adaptive") {
        const matf::MatfConfig cfg;
        VideoSequence fused;
        fused.id = estimates.id + "/adaptive";
        fused.frames.push_back(estimates.frames.front());
        std::optional<matf::MotionMap> prev_map;
        for (std::size_t t = 1; t < estimates.length(); ++t) {
            const auto& current = estimates.frames[t];
            const auto& prev_out = fused.frames.back();
            const auto flow = estimate_flow_classic(current, prev_out);
            const auto cues = matf::motion_cues(flow, current, warp(prev_out, flow), nullptr, cfg);
            auto map = matf::motion_map(cues, matf::edge_suppression(current, cfg), cfg, prev_map ? &*prev_map : nullptr);
            fused.frames.push_back(matf::fuse_adaptive(current, prev_out, flow, map));
            io::write_png(a.out / "motion" / io::frame_name(t), map.m);
            prev_map = std::move(map);
        }
        record("adaptive", fused, json::object());
    } else {
        throw std::invalid_argument("--mode must be 'fixed' or 'adaptive'");
    }
    write_json(a.out / "summary.json", summary);
    return 0;
}

// ---- eval / ytplane ---------------------------------------------------------

struct EvalArgs {
    fs::path restored, reference, out, perceptual;
    bool bins = false;
    std::optional<double> threshold;
};

int run_eval(const EvalArgs& a) {
    eval::EvalOptions opts;
    opts.bins = a.bins || a.threshold.has_value();
    opts.bin_threshold = a.threshold;
    if (!a.perceptual.empty()) opts.perceptual = eval::read_perceptual_table(a.perceptual);
    const auto report = eval::evaluate(a.restored, a.reference, opts);
    eval::write_report(a.out, report);
    std::cout << report.table();
    for (const auto& m : report.missing) log("missing restored clip: " + m);
    return 0;
}

struct YtArgs {
    fs::path video, out;
    int column = 0;
};

int run_ytplane(const YtArgs& a) {
    const auto video = io::read_video(a.video);
    const auto plane = eval::yt_plane(video, a.column);
    io::write_png(a.out, plane);
    std::cout << "column " << a.column << ": " << plane.height() << " x " << plane.width()
              << " y-t plane, column TV " << eval::column_total_variation(plane) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"turbrec: recurrent turbulence mitigation for video"};
    app.require_subcommand(1);
    int torch_threads = 0;
    app.add_option("--threads", torch_threads, "libtorch intra-op threads (0 keeps the default)");

    SimulateArgs sim;
    auto* s = app.add_subcommand("simulate", "Degrade clean frames with the toy turbulence simulator");
    s->add_option("--clean", sim.clean, "Clean frame directory (or a tree of them)")->required();
    s->add_option("--out", sim.out, "Output directory")->required();
    s->add_option("--level", sim.level, "weak, medium or strong")->check(CLI::IsMember({"weak", "medium", "strong"}));
    s->add_option("--seed", sim.seed, "Simulator seed");
    s->add_option("--presets", sim.presets, "Preset JSON (defaults to the built-in table)");

    BuildArgs build;
    auto* b = app.add_subcommand("build-dataset", "Cut paired dynamic clips from scenes");
    b->add_option("--scenes", build.scenes, "Directory of <scene>/{turbulent/, pseudo_clean.png}")->required();
    b->add_option("--out", build.out, "Output dataset root")->required();
    b->add_option("--seed", build.seed, "Trajectory seed");
    b->add_option("--n-random", build.n_random, "Random clips per scene")->check(CLI::NonNegativeNumber);
    b->add_option("--crop", build.crop, "Crop size in pixels")->check(CLI::PositiveNumber);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train the restoration network");
    t->add_option("--data", train.data, "Dataset root")->required();
    t->add_option("--config", train.config, "Project config JSON");
    t->add_option("--out", train.out, "Run directory")->required();
    t->add_option("--ablation", train.ablation, "full, no_matf, no_mswarp, no_level, or all for the four-row report");
    t->add_option("--resume", train.resume, "Checkpoint directory to resume from");
    t->add_option("--max-steps", train.max_steps, "Stop after this many optimizer steps");
    t->add_option("--epochs", train.epochs, "Override the configured epoch count");

    RestoreArgs restore;
    auto* r = app.add_subcommand("restore", "Restore turbulent videos with a trained checkpoint");
    r->add_option("--input", restore.input, "Frame directory (or a tree of them)")->required();
    r->add_option("--checkpoint", restore.checkpoint, "Checkpoint directory")->required();
    r->add_option("--out", restore.out, "Output directory")->required();
    r->add_option("--level", restore.level, "auto or a fixed turbulence level in [0, 1]");
    r->add_flag("--trace", restore.trace, "Also write motion maps and per-frame levels");

    FuseArgs fuse;
    auto* f = app.add_subcommand("fuse-analysis", "Fixed or adaptive temporal fusion of per-frame estimates");
    f->add_option("--clip", fuse.clip, "Frame directory or clip directory")->required();
    f->add_option("--out", fuse.out, "Output directory")->required();
    f->add_option("--mode", fuse.mode, "fixed or adaptive")->check(CLI::IsMember({"fixed", "adaptive"}));
    f->add_option("--weights", fuse.weights, "Comma-separated current-frame weights M");
    f->add_flag("--history-weights", fuse.history_weights, "Read --weights as history weights w = 1 - M");
    f->add_option("--reference", fuse.reference, "Clean frames for PSNR (defaults to <clip>/clean)");
    f->add_option("--column", fuse.column, "y-t plane column (defaults to the centre)");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "PSNR / SSIM / temporal metrics against references");
    e->add_option("--restored", ev.restored, "Restored clips")->required();
    e->add_option("--reference", ev.reference, "Reference clips")->required();
    e->add_option("--out", ev.out, "Report JSON")->required();
    e->add_flag("--bins", ev.bins, "Split the report into slow and fast motion bins");
    e->add_option("--bin-threshold", ev.threshold, "Displacement threshold in px/frame (default: median)");
    e->add_option("--perceptual-json", ev.perceptual, "Precomputed perceptual distances");

    YtArgs yt;
    auto* y = app.add_subcommand("ytplane", "Extract the y-t plane of one column");
    y->add_option("--video", yt.video, "Frame directory")->required();
    y->add_option("--column", yt.column, "Column index")->required();
    y->add_option("--out", yt.out, "Output PNG")->required();

    fs::path config_check;
    auto* c = app.add_subcommand("config", "Print the default config, or validate one and print its hash");
    c->add_option("--check", config_check, "Config file to validate");

    CLI11_PARSE(app, argc, argv);
    try {
        if (torch_threads > 0) torch::set_num_threads(torch_threads);
        if (s->parsed()) return run_simulate(sim);
        if (b->parsed()) return run_build_dataset(build);
        if (t->parsed()) return run_train(train);
        if (r->parsed()) return run_restore(restore);
        if (f->parsed()) return run_fuse_analysis(fuse);
        if (e->parsed()) return run_eval(ev);
        if (y->parsed()) return run_ytplane(yt);
        if (c->parsed()) {
            if (config_check.empty()) {
                std::cout << to_json(ProjectConfig{}).dump(2) << '\n';
            } else {
                std::cout << config_hash(load_config(config_check)) << '\n';
            }
            return 0;
        }
    } catch (const std::exception& ex) {
        std::cerr << "turbrec: error: " << ex.what() << '\n';
        return 1;
    }
    return 0;
}
