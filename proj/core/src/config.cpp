#include "turbrec/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

#include "turbrec/io.hpp"

namespace turbrec {

using nlohmann::json;

void ProjectConfig::validate() const {
    pipeline.validate();
    train.validate();
}

json to_json(const ProjectConfig& c) {
    const auto& m = c.pipeline.mitigator;
    const auto& f = c.pipeline.matf;
    const auto& l = c.pipeline.losses;
    const auto& cond = c.pipeline.conditioning;
    const auto& t = c.train;
    json j;
    j["mitigator"] = {{"base_channels", m.base_channels}, {"scales", m.scales},
                      {"twt_heads", m.twt_heads},         {"twt_window", m.twt_window},
                      {"flow_channels", m.flow_channels}, {"refinement_blocks", m.refinement_blocks},
                      {"conditioning", m.conditioning},   {"multiscale_warp", m.multiscale_warp}};
    j["conditioning"] = {{"embed_dim", m.embed_dim},
                         {"scorer", cond.scorer},
                         {"external_scores", cond.external_scores},
                         {"proxy_scale", cond.proxy_scale},
                         {"calibration", cond.calibration ? json{{"s_min", cond.calibration->s_min},
                                                                 {"s_max", cond.calibration->s_max}}
                                                          : json(nullptr)}};
    j["matf"] = {{"w_motion", f.w_motion},
                 {"w_photo", f.w_photo},
                 {"w_fb", f.w_fb},
                 {"edge_strength", f.edge_strength},
                 {"ema_alpha", f.ema_alpha},
                 {"m_floor", f.m_floor},
                 {"m_ceil", f.m_ceil},
                 {"fixed_weight", f.fixed_weight ? json(*f.fixed_weight) : json(nullptr)},
                 {"use_fb", f.use_fb},
                 {"static_threshold", f.static_threshold},
                 {"norm_percentile", f.norm_percentile},
                 {"motion_scale_floor", f.motion_scale_floor},
                 {"photo_scale_floor", f.photo_scale_floor},
                 {"fb_scale_floor", f.fb_scale_floor},
                 {"edge_scale_floor", f.edge_scale_floor}};
    j["losses"] = {{"epsilon", l.epsilon},       {"lambda_dwt", l.lambda_dwt},   {"lambda_lap", l.lambda_lap},
                   {"lambda_temp", l.lambda_temp}, {"lambda_flow", l.lambda_flow}, {"flow_offsets", l.flow_offsets},
                   {"mask_delta", l.mask_delta}};
    j["trainer"] = {{"epochs", t.epochs},
                    {"crop", t.crop},
                    {"batch", t.batch},
                    {"lr", t.lr},
                    {"lr_step", t.lr_step},
                    {"lr_gamma", t.lr_gamma},
                    {"tbptt_window", t.tbptt_window},
                    {"seed", t.seed},
                    {"ablation", ablation_name(t.ablation)},
                    {"max_steps", t.max_steps ? json(*t.max_steps) : json(nullptr)},
                    {"max_frames_per_clip", t.max_frames_per_clip ? json(*t.max_frames_per_clip) : json(nullptr)},
                    {"val_crop", t.val_crop},
                    {"val_max_frames", t.val_max_frames ? json(*t.val_max_frames) : json(nullptr)},
                    {"filter",
                     {{"enabled", t.filter.enabled},
                      {"warmup_epochs", t.filter.warmup_epochs},
                      {"slope_threshold", t.filter.slope_threshold}}}};
    j["history"] = c.pipeline.history;
    return j;
}

namespace {

// Reads optional keys from one section and rejects anything it does not know.
class Section {
public:
    Section(const json& root, const char* name) : name_(name) {
        if (root.contains(name)) {
            if (!root.at(name).is_object()) throw std::invalid_argument(std::string("config section '") + name + "' must be an object");
            j_ = &root.at(name);
        }
    }
    void finish() const {
        if (j_ == nullptr) return;
        for (const auto& [key, value] : j_->items()) {
            if (!seen_.contains(key)) throw std::invalid_argument("unknown config key " + name_ + "." + key);
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (j_ != nullptr && j_->contains(key) && !j_->at(key).is_null()) out = j_->at(key).get<T>();
    }
    template <typename T>
    void get_optional(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        if (j_ == nullptr || !j_->contains(key)) return;
        if (j_->at(key).is_null()) out.reset();
        else out = j_->at(key).get<T>();
    }
    const json* raw(const char* key) {
        seen_.insert(key);
        if (j_ == nullptr || !j_->contains(key)) return nullptr;
        return &j_->at(key);
    }

private:
    std::string name_;
    const json* j_ = nullptr;
    std::set<std::string> seen_;
};

}  // namespace

ProjectConfig project_config_from_json(const json& j) {
    static const std::set<std::string> sections{"mitigator", "conditioning", "matf", "losses", "trainer", "history"};
    for (const auto& [key, value] : j.items()) {
        if (!sections.contains(key)) throw std::invalid_argument("unknown config section '" + key + "'");
    }
    ProjectConfig c;
    auto& m = c.pipeline.mitigator;
    {
        Section s(j, "mitigator");
        s.get("base_channels", m.base_channels);
        s.get("scales", m.scales);
        s.get("twt_heads", m.twt_heads);
        s.get("twt_window", m.twt_window);
        s.get("flow_channels", m.flow_channels);
        s.get("refinement_blocks", m.refinement_blocks);
        s.get("conditioning", m.conditioning);
        s.get("multiscale_warp", m.multiscale_warp);
        s.finish();
    }
    {
        auto& cond = c.pipeline.conditioning;
        Section s(j, "conditioning");
        s.get("embed_dim", m.embed_dim);
        s.get("scorer", cond.scorer);
        s.get("external_scores", cond.external_scores);
        s.get("proxy_scale", cond.proxy_scale);
        if (const json* cal = s.raw("calibration"); cal != nullptr && !cal->is_null()) {
            cond.calibration = conditioning::Calibration{cal->at("s_min").get<double>(), cal->at("s_max").get<double>()};
        }
        s.finish();
    }
    {
        auto& f = c.pipeline.matf;
        Section s(j, "matf");
        s.get("w_motion", f.w_motion);
        s.get("w_photo", f.w_photo);
        s.get("w_fb", f.w_fb);
        s.get("edge_strength", f.edge_strength);
        s.get("ema_alpha", f.ema_alpha);
        s.get("m_floor", f.m_floor);
        s.get("m_ceil", f.m_ceil);
        s.get_optional("fixed_weight", f.fixed_weight);
        s.get("use_fb", f.use_fb);
        s.get("static_threshold", f.static_threshold);
        s.get("norm_percentile", f.norm_percentile);
        s.get("motion_scale_floor", f.motion_scale_floor);
        s.get("photo_scale_floor", f.photo_scale_floor);
        s.get("fb_scale_floor", f.fb_scale_floor);
        s.get("edge_scale_floor", f.edge_scale_floor);
        s.finish();
    }
    {
        auto& l = c.pipeline.losses;
        Section s(j, "losses");
        s.get("epsilon", l.epsilon);
        s.get("lambda_dwt", l.lambda_dwt);
        s.get("lambda_lap", l.lambda_lap);
        s.get("lambda_temp", l.lambda_temp);
        s.get("lambda_flow", l.lambda_flow);
        s.get("flow_offsets", l.flow_offsets);
        s.get("mask_delta", l.mask_delta);
        s.finish();
    }
    {
        auto& t = c.train;
        Section s(j, "trainer");
        s.get("epochs", t.epochs);
        s.get("crop", t.crop);
        s.get("batch", t.batch);
        s.get("lr", t.lr);
        s.get("lr_step", t.lr_step);
        s.get("lr_gamma", t.lr_gamma);
        s.get("tbptt_window", t.tbptt_window);
        s.get("seed", t.seed);
        std::string ablation = ablation_name(t.ablation);
        s.get("ablation", ablation);
        t.ablation = parse_ablation(ablation);
        s.get_optional("max_steps", t.max_steps);
        s.get_optional("max_frames_per_clip", t.max_frames_per_clip);
        s.get("val_crop", t.val_crop);
        s.get_optional("val_max_frames", t.val_max_frames);
        if (const json* f = s.raw("filter"); f != nullptr) {
            if (f->contains("enabled")) t.filter.enabled = f->at("enabled").get<bool>();
            if (f->contains("warmup_epochs")) t.filter.warmup_epochs = f->at("warmup_epochs").get<int>();
            if (f->contains("slope_threshold")) t.filter.slope_threshold = f->at("slope_threshold").get<double>();
        }
        s.finish();
    }
    if (j.contains("history")) c.pipeline.history = j.at("history").get<std::size_t>();
    c.validate();
    return c;
}

ProjectConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io::IoError("cannot open config " + path.string());
    return project_config_from_json(json::parse(in));
}

void save_config(const std::filesystem::path& path, const ProjectConfig& config) {
    std::ofstream out(path);
    if (!out) throw io::IoError("cannot write config " + path.string());
    out << to_json(config).dump(2) << '\n';
}

std::string config_hash(const ProjectConfig& config) {
    const std::string text = to_json(config).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace turbrec
