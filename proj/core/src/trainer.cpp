#include "turbrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "turbrec/checkpoint.hpp"
#include "turbrec/config.hpp"
#include "turbrec/image_ops.hpp"
#include "turbrec/io.hpp"
#include "turbrec/metrics.hpp"
#include "turbrec/rng.hpp"
#include "turbrec/tensor_ops.hpp"

namespace turbrec::trainer {

using nlohmann::json;

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("trainer.lr must be > 0");
    if (tbptt_window < 2) throw std::invalid_argument("trainer.tbptt_window must be >= 2");
    if (epochs < 1) throw std::invalid_argument("trainer.epochs must be >= 1");
    if (lr_step < 1) throw std::invalid_argument("trainer.lr_step must be >= 1");
    if (!(lr_gamma > 0.0)) throw std::invalid_argument("trainer.lr_gamma must be > 0");
    if (batch != 1) throw std::invalid_argument("trainer.batch must be 1 (one clip per recurrence)");
    if (crop < 8) throw std::invalid_argument("trainer.crop must be >= 8");
    if (filter.warmup_epochs < 1) throw std::invalid_argument("trainer.filter.warmup_epochs must be >= 1");
    if (max_frames_per_clip && *max_frames_per_clip < 2) {
        throw std::invalid_argument("trainer.max_frames_per_clip must be >= 2");
    }
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
    return config.lr * std::pow(config.lr_gamma, static_cast<double>(epoch / config.lr_step));
}

FilterResult learnability_filter(const std::vector<SequenceLossTrajectory>& trajectories, int warmup_epochs,
                                 double slope_threshold) {
    FilterResult r;
    for (const auto& t : trajectories) {
        if (static_cast<int>(t.epoch_loss.size()) < warmup_epochs || t.epoch_loss.empty()) r.deferred = true;
    }
    for (const auto& t : trajectories) {
        if (r.deferred) {
            r.kept.push_back(t.seq_id);
            continue;
        }
        const double first = t.epoch_loss.front();
        const double last = t.epoch_loss.back();
        const double improvement = first > 0.0 ? (first - last) / first : 0.0;
        (improvement < slope_threshold ? r.dropped : r.kept).push_back(t.seq_id);
    }
    return r;
}

std::size_t checkpoint_select(const std::vector<ValMetrics>& per_epoch, double psnr_reference) {
    if (per_epoch.empty()) throw std::invalid_argument("checkpoint_select needs at least one validation pass");
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < per_epoch.size(); ++i) {
        const double score = per_epoch[i].psnr / psnr_reference + per_epoch[i].ssim;
        if (score >= best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

namespace {

json log_json(const LogEntry& e) {
    return {{"step", e.step}, {"epoch", e.epoch}, {"seq_id", e.seq_id}, {"lr", e.lr},
            {"terms", {{"rec", e.rec}, {"dwt", e.dwt}, {"lap", e.lap}, {"temp", e.temp}, {"flow", e.flow}}},
            {"total", std::isfinite(e.total) ? json(e.total) : json(nullptr)},
            {"frames", e.frames}, {"skipped", e.skipped}};
}

std::unique_ptr<conditioning::QualityScorer> make_scorer(const ConditioningConfig& c) {
    if (c.scorer == "external") {
        return std::make_unique<conditioning::ExternalScorer>(conditioning::ExternalScorer::from_json_file(c.external_scores));
    }
    return std::make_unique<conditioning::AnalyticProxy>(c.proxy_scale);
}

std::string clip_name(const datasets::PairedClip& c) {
    if (!c.spec.clip_id.empty()) {
        return c.spec.scene_id.empty() ? c.spec.clip_id : c.spec.scene_id + "/" + c.spec.clip_id;
    }
    return c.degraded.id;
}

Frame centre_crop(const Frame& f, int size) {
    if (size <= 0 || (f.width() <= size && f.height() <= size)) return f;
    const int w = std::min(size, f.width());
    const int h = std::min(size, f.height());
    return crop(f, (f.width() - w) / 2, (f.height() - h) / 2, w, h);
}

}  // namespace

Trainer::Trainer(PipelineConfig pipeline, TrainConfig config)
    : pipeline_(apply_ablation(std::move(pipeline), config.ablation)), config_(config) {
    pipeline_.validate();
    config_.validate();
    torch::manual_seed(config_.seed);
    model_ = mitigator::Mitigator(pipeline_.mitigator);
    optimizer_ = std::make_unique<torch::optim::Adam>(model_->parameters(), torch::optim::AdamOptions(config_.lr));
    if (pipeline_.conditioning.calibration) {
        calibration_ = *pipeline_.conditioning.calibration;
        calibrated_ = true;
    }
}

void Trainer::resume(const fs::path& checkpoint_dir) {
    checkpoint::CheckpointInfo info = checkpoint::read_info(checkpoint_dir);
    checkpoint::load_weights(checkpoint_dir, model_);
    checkpoint::load_optimizer(checkpoint_dir, *optimizer_);
    step_ = info.step;
    start_epoch_ = info.epoch + 1;
    if (info.metrics.contains("calibration")) {
        calibration_ = {info.metrics["calibration"].at("s_min").get<double>(),
                        info.metrics["calibration"].at("s_max").get<double>()};
        calibrated_ = true;
    }
}

Trainer::WindowLoss Trainer::train_window(const std::vector<torch::Tensor>& inputs,
                                          const std::vector<torch::Tensor>& targets, const std::vector<double>& levels,
                                          mitigator::RecurrentState& state) {
    model_->train();
    optimizer_->zero_grad();
    WindowLoss w;
    torch::Tensor acc;
    const auto n = inputs.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto level = torch::full({inputs[i].size(0)}, levels[i], inputs[i].options());
        const auto r = process_frame(model_, pipeline_, inputs[i], state, level);
        losses::LossInputs in;
        in.output = r.output;
        in.target = targets[i];
        in.flow = r.step.flows.final_flow;
        if (r.static_mask.defined()) {
            in.prev_output = r.prev_output;
            in.static_mask = r.static_mask;
        }
        in.history = r.history;
        in.history_flows = r.history_flows;
        const auto report = losses::total_loss(in, pipeline_.losses);
        w.entry.rec += report.rec;
        w.entry.dwt += report.dwt;
        w.entry.lap += report.lap;
        w.entry.temp += report.temp;
        w.entry.flow += report.flow;
        if (!std::isfinite(report.total_value)) w.finite = false;
        acc = acc.defined() ? acc + report.total : report.total;
    }
    const double scale = 1.0 / static_cast<double>(n);
    w.entry.rec *= scale;
    w.entry.dwt *= scale;
    w.entry.lap *= scale;
    w.entry.temp *= scale;
    w.entry.flow *= scale;
    w.entry.frames = static_cast<int>(n);
    w.entry.lr = static_cast<torch::optim::AdamOptions&>(optimizer_->param_groups().front().options()).lr();

    const auto loss = acc * scale;
    w.entry.total = loss.item<double>();
    if (!std::isfinite(w.entry.total)) w.finite = false;
    if (w.finite) {
        loss.backward();
        bool grads_finite = true;
        for (const auto& p : model_->parameters()) {
            if (p.grad().defined() && !torch::isfinite(p.grad()).all().item<bool>()) grads_finite = false;
        }
        if (grads_finite) optimizer_->step();
        else w.finite = false;
    }
    optimizer_->zero_grad();
    if (w.finite) {
        state.detach();
    } else {
        // Drop the poisoned history and restart the recurrence from the
        // last input frame.
        state = mitigator::RecurrentState::initial(inputs.back().detach(), pipeline_.history);
        state.t = 1;
    }
    w.entry.skipped = !w.finite;
    w.entry.step = step_;
    ++step_;
    return w;
}

ValMetrics Trainer::validate(const std::vector<datasets::PairedClip>& clips) {
    ValMetrics v;
    if (clips.empty()) return v;
    const auto scorer = make_scorer(pipeline_.conditioning);
    RecurrentRestorer restorer(model_, pipeline_);
    LevelSource levels{std::nullopt, scorer.get(), calibration_};
    double psnr_sum = 0.0, ssim_sum = 0.0, input_sum = 0.0;
    for (const auto& clip : clips) {
        VideoSequence in, ref;
        in.id = clip_name(clip);
        const std::size_t n = std::min<std::size_t>(
            clip.degraded.length(), config_.val_max_frames ? static_cast<std::size_t>(*config_.val_max_frames)
                                                           : clip.degraded.length());
        for (std::size_t t = 0; t < n; ++t) {
            in.frames.push_back(centre_crop(clip.degraded.frames[t], config_.val_crop));
            ref.frames.push_back(centre_crop(clip.clean.frames[t], config_.val_crop));
        }
        const auto out = restorer.restore(in, levels);
        psnr_sum += eval::mean_psnr(out, ref);
        ssim_sum += eval::mean_ssim(out, ref);
        input_sum += eval::mean_psnr(in, ref);
    }
    model_->train();
    const double k = static_cast<double>(clips.size());
    return {psnr_sum / k, ssim_sum / k, input_sum / k};
}

TrainResult Trainer::train(const std::vector<datasets::PairedClip>& train_clips,
                           const std::vector<datasets::PairedClip>& val_clips, const TrainOptions& options) {
    if (train_clips.empty()) throw std::invalid_argument("no training clips");
    const auto scorer = make_scorer(pipeline_.conditioning);
    if (!calibrated_) {
        std::vector<double> scores;
        for (const auto& clip : train_clips) {
            const std::size_t stride = std::max<std::size_t>(1, clip.degraded.length() / 8);
            for (std::size_t t = 0; t < clip.degraded.length(); t += stride) {
                scores.push_back(scorer->score(clip.degraded.frames[t], clip_name(clip) + "/" + io::frame_name(t)));
            }
        }
        calibration_ = conditioning::calibrate(scores);
        calibrated_ = true;
    }

    std::ofstream log_file, val_file;
    ProjectConfig project{pipeline_, config_};
    if (options.out_dir) {
        fs::create_directories(*options.out_dir);
        const auto mode = start_epoch_ > 0 ? std::ios::app : std::ios::trunc;
        log_file.open(*options.out_dir / "train_log.ndjson", mode);
        val_file.open(*options.out_dir / "validation.ndjson", mode);
        save_config(*options.out_dir / "config.json", project);
    }

    TrainResult result;
    std::map<std::string, SequenceLossTrajectory> trajectories;
    std::vector<std::size_t> active(train_clips.size());
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;
    bool filtered = false;
    bool stop = false;

    for (int epoch = start_epoch_; epoch < config_.epochs && !stop; ++epoch) {
        const double lr = lr_at_epoch(config_, epoch);
        for (auto& g : optimizer_->param_groups()) static_cast<torch::optim::AdamOptions&>(g.options()).lr(lr);

        auto order = active;
        auto rng = make_rng(config_.seed, {0x0EB0C4, static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), rng);

        std::map<std::string, std::pair<double, int>> epoch_loss;
        for (std::size_t idx : order) {
            const auto& clip = train_clips[idx];
            const std::string id = clip_name(clip);
            const int fw = clip.degraded.frames.front().width();
            const int fh = clip.degraded.frames.front().height();
            const int cw = std::min(config_.crop, fw);
            const int ch = std::min(config_.crop, fh);
            auto crng = make_rng(config_.seed, {0xC409, static_cast<std::uint64_t>(epoch), idx});
            const int x0 = std::uniform_int_distribution<int>(0, fw - cw)(crng);
            const int y0 = std::uniform_int_distribution<int>(0, fh - ch)(crng);
            std::size_t first = 0, count = clip.degraded.length();
            if (config_.max_frames_per_clip && count > static_cast<std::size_t>(*config_.max_frames_per_clip)) {
                const auto limit = static_cast<std::size_t>(*config_.max_frames_per_clip);
                first = std::uniform_int_distribution<std::size_t>(0, count - limit)(crng);
                count = limit;
            }

            mitigator::RecurrentState state;
            for (std::size_t w0 = 0; w0 < count && !stop; w0 += static_cast<std::size_t>(config_.tbptt_window)) {
                const std::size_t w1 = std::min(count, w0 + static_cast<std::size_t>(config_.tbptt_window));
                std::vector<torch::Tensor> inputs, targets;
                std::vector<double> levels;
                for (std::size_t t = first + w0; t < first + w1; ++t) {
                    const Frame d = crop(clip.degraded.frames[t], x0, y0, cw, ch);
                    inputs.push_back(tensor::from_frame(d));
                    targets.push_back(tensor::from_frame(crop(clip.clean.frames[t], x0, y0, cw, ch)));
                    const auto score = scorer->score(d, id + "/" + io::frame_name(t));
                    levels.push_back(conditioning::level_from_score(score, calibration_).level);
                }
                if (w0 == 0) state = mitigator::RecurrentState::initial(inputs.front(), pipeline_.history);
                auto wl = train_window(inputs, targets, levels, state);
                wl.entry.epoch = epoch;
                wl.entry.seq_id = id;
                if (!wl.finite) ++result.skipped_steps;
                else {
                    auto& [sum, k] = epoch_loss[id];
                    sum += wl.entry.total;
                    ++k;
                }
                if (log_file.is_open()) log_file << log_json(wl.entry).dump() << '\n';
                if (options.on_step) options.on_step(wl.entry);
                result.log.push_back(wl.entry);
                if (config_.max_steps && step_ >= *config_.max_steps) stop = true;
            }
        }
        for (const auto& [id, sk] : epoch_loss) {
            auto& traj = trajectories[id];
            traj.seq_id = id;
            traj.epoch_loss.push_back(sk.first / sk.second);
        }

        const ValMetrics v = validate(val_clips.empty() ? train_clips : val_clips);
        result.validation.push_back(v);
        result.epochs_run = epoch - start_epoch_ + 1;
        if (val_file.is_open()) {
            val_file << json{{"epoch", epoch}, {"psnr", v.psnr}, {"ssim", v.ssim}, {"input_psnr", v.input_psnr},
                             {"step", step_}}
                            .dump()
                     << '\n';
            val_file.flush();
        }
        if (options.on_epoch) options.on_epoch(epoch, v);

        if (config_.filter.enabled && !filtered && epoch + 1 - start_epoch_ >= config_.filter.warmup_epochs) {
            std::vector<SequenceLossTrajectory> current;
            for (std::size_t i : active) {
                const auto it = trajectories.find(clip_name(train_clips[i]));
                current.push_back(it != trajectories.end() ? it->second
                                                           : SequenceLossTrajectory{clip_name(train_clips[i]), {}});
            }
            auto fr = learnability_filter(current, config_.filter.warmup_epochs, config_.filter.slope_threshold);
            if (!fr.deferred) {
                filtered = true;
                std::vector<std::size_t> kept;
                for (std::size_t i : active) {
                    if (std::find(fr.kept.begin(), fr.kept.end(), clip_name(train_clips[i])) != fr.kept.end()) {
                        kept.push_back(i);
                    }
                }
                // Never filter the whole set away.
                if (!kept.empty()) active = kept;
                result.filter = fr;
            }
        }

        if (options.out_dir) {
            checkpoint::CheckpointInfo info{project, config_hash(project), step_, epoch,
                                            json{{"psnr", v.psnr}, {"ssim", v.ssim}, {"input_psnr", v.input_psnr},
                                                 {"calibration", {{"s_min", calibration_.s_min}, {"s_max", calibration_.s_max}}}}};
            checkpoint::save(*options.out_dir / "last", model_, info, optimizer_.get());
            if (checkpoint_select(result.validation) == result.validation.size() - 1) {
                checkpoint::save(*options.out_dir / "best", model_, info);
            }
        }
    }
    result.steps = step_;
    result.best_epoch = result.validation.empty() ? 0 : checkpoint_select(result.validation);
    for (auto& [id, t] : trajectories) result.trajectories.push_back(t);
    return result;
}

std::string AblationReport::table() const {
    std::ostringstream os;
    os << std::left << std::setw(28) << "Method" << std::right << std::setw(10) << "PSNR" << std::setw(9) << "SSIM"
       << '\n';
    for (const auto& r : rows) {
        os << std::left << std::setw(28) << r.label << std::right << std::fixed << std::setprecision(4)
           << std::setw(10) << r.psnr << std::setw(9) << r.ssim << '\n';
    }
    return os.str();
}

json AblationReport::to_json() const {
    json rows_json = json::array();
    for (const auto& r : rows) {
        rows_json.push_back({{"ablation", ablation_name(r.ablation)},
                             {"label", r.label},
                             {"psnr", r.psnr},
                             {"ssim", r.ssim},
                             {"input_psnr", r.input_psnr},
                             {"steps", r.steps}});
    }
    return {{"rows", rows_json}};
}

AblationReport run_ablation(const std::vector<datasets::PairedClip>& train_clips,
                            const std::vector<datasets::PairedClip>& val_clips, const PipelineConfig& pipeline,
                            const TrainConfig& config, const std::optional<fs::path>& out_dir) {
    static const std::vector<std::pair<Ablation, std::string>> variants{
        {Ablation::full, "Full"},
        {Ablation::no_matf, "w/o MATF"},
        {Ablation::no_mswarp, "w/o multi-scale warp"},
        {Ablation::no_level, "w/o turb level embedding"}};
    AblationReport report;
    for (const auto& [ablation, label] : variants) {
        TrainConfig c = config;
        c.ablation = ablation;
        Trainer trainer(pipeline, c);
        TrainOptions opts;
        if (out_dir) opts.out_dir = *out_dir / ablation_name(ablation);
        const auto r = trainer.train(train_clips, val_clips, opts);
        const auto& best = r.validation.at(r.best_epoch);
        report.rows.push_back({ablation, label, best.psnr, best.ssim, best.input_psnr, r.steps});
    }
    return report;
}

std::pair<std::vector<datasets::PairedClip>, std::vector<datasets::PairedClip>> load_dataset(const fs::path& root,
                                                                                            std::uint64_t seed) {
    std::vector<datasets::PairedClip> train, val;
    if (fs::is_directory(root / "train")) {
        for (const auto& d : datasets::find_clip_dirs(root / "train")) train.push_back(datasets::read_clip(d));
        if (fs::is_directory(root / "val")) {
            for (const auto& d : datasets::find_clip_dirs(root / "val")) val.push_back(datasets::read_clip(d));
        }
        return {std::move(train), std::move(val)};
    }
    std::vector<datasets::PairedClip> all;
    for (const auto& d : datasets::find_clip_dirs(root)) all.push_back(datasets::read_clip(d));
    std::vector<std::string> scenes;
    for (const auto& c : all) {
        if (std::find(scenes.begin(), scenes.end(), c.spec.scene_id) == scenes.end()) scenes.push_back(c.spec.scene_id);
    }
    const auto split = datasets::split_scenes(scenes, seed);
    for (auto& c : all) {
        const bool is_val = std::find(split.val.begin(), split.val.end(), c.spec.scene_id) != split.val.end();
        (is_val ? val : train).push_back(std::move(c));
    }
    return {std::move(train), std::move(val)};
}

}  // namespace turbrec::trainer
