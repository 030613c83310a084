#include "turbrec/pipeline.hpp"

#include <stdexcept>

#include "turbrec/io.hpp"
#include "turbrec/optical_flow.hpp"
#include "turbrec/tensor_ops.hpp"

namespace turbrec {

Ablation parse_ablation(const std::string& name) {
    if (name == "full") return Ablation::full;
    if (name == "no_matf") return Ablation::no_matf;
    if (name == "no_mswarp") return Ablation::no_mswarp;
    if (name == "no_level") return Ablation::no_level;
    throw std::invalid_argument("unknown ablation '" + name + "' (full, no_matf, no_mswarp, no_level)");
}

std::string ablation_name(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::no_matf: return "no_matf";
        case Ablation::no_mswarp: return "no_mswarp";
        case Ablation::no_level: return "no_level";
    }
    return "full";
}

void PipelineConfig::validate() const {
    mitigator.validate();
    matf.validate();
    losses.validate();
    if (conditioning.scorer != "analytic" && conditioning.scorer != "external") {
        throw std::invalid_argument("conditioning.scorer must be 'analytic' or 'external'");
    }
    if (conditioning.calibration &&
        !(conditioning.calibration->s_min > 0.0 && conditioning.calibration->s_min < conditioning.calibration->s_max)) {
        throw std::invalid_argument("conditioning.calibration requires 0 < s_min < s_max");
    }
}

PipelineConfig apply_ablation(PipelineConfig config, Ablation ablation) {
    switch (ablation) {
        case Ablation::full: break;
        case Ablation::no_matf: config.matf.fixed_weight = 1.0; break;
        case Ablation::no_mswarp: config.mitigator.multiscale_warp = false; break;
        case Ablation::no_level: config.mitigator.conditioning = false; break;
    }
    return config;
}

namespace {

// One batch element as an N = 1 tensor.
torch::Tensor item(const torch::Tensor& t, int64_t i) { return t.narrow(0, i, 1); }

}  // namespace

FrameResult process_frame(mitigator::Mitigator& model, const PipelineConfig& config, const torch::Tensor& input,
                          mitigator::RecurrentState& state, const torch::Tensor& level) {
    if (!state.prev_output.defined()) throw std::logic_error("recurrent state is not initialised");
    FrameResult r;
    r.prev_output = state.prev_output;
    r.step = model->forward_step(input, state.prev_output, level);
    const auto& o_hat = r.step.o_hat;
    const auto flow = r.step.flows.final_flow.to(o_hat.scalar_type());

    std::vector<torch::Tensor> past_flows;
    for (const auto& [o, f] : state.buffer) {
        r.history.push_back(o);
        past_flows.push_back(f);
    }
    r.history_flows = mitigator::compose_flows(flow, past_flows, std::max<std::size_t>(1, r.history.size()));

    const auto& mc = config.matf;
    if (state.t == 0) {
        r.output = o_hat;
    } else if (mc.fixed_weight) {
        const double w = *mc.fixed_weight;
        r.output = (w * o_hat + (1.0 - w) * state.prev_output).clamp(0.0, 1.0);
        const int64_t h = o_hat.size(2), wd = o_hat.size(3);
        r.motion_map = matf::MotionMap{Plane(static_cast<int>(h), static_cast<int>(wd), w)};
        r.static_mask = tensor::from_plane(matf::static_mask(*r.motion_map, mc).s, o_hat.scalar_type())
                            .expand({o_hat.size(0), 1, h, wd});
    } else {
        torch::Tensor m;
        {
            torch::NoGradGuard guard;
            const auto warped = tensor::warp(state.prev_output.detach(), flow.detach());
            std::vector<torch::Tensor> maps, masks;
            for (int64_t i = 0; i < o_hat.size(0); ++i) {
                const Frame current = tensor::to_frame(item(input, i));
                const FlowField f = tensor::to_flow(item(flow, i));
                std::optional<FlowField> back;
                if (mc.use_fb) back = estimate_flow_classic(tensor::to_frame(item(state.prev_output, i)), current);
                const auto cues =
                    matf::motion_cues(f, current, tensor::to_frame(item(warped, i)), back ? &*back : nullptr, mc);
                const auto edge = matf::edge_suppression(current, mc);
                // The carried map belongs to batch element 0 only.
                const bool has_prev = i == 0 && state.prev_motion_map && state.prev_motion_map->m.same_shape(edge);
                auto map = matf::motion_map(cues, edge, mc, has_prev ? &*state.prev_motion_map : nullptr);
                masks.push_back(tensor::from_plane(matf::static_mask(map, mc).s, o_hat.scalar_type()));
                maps.push_back(tensor::from_plane(map.m, o_hat.scalar_type()));
                if (i == 0) r.motion_map = std::move(map);
            }
            r.static_mask = torch::cat(masks, 0);
            m = torch::cat(maps, 0);
        }
        r.output = (m * o_hat + (1.0 - m) * tensor::warp(state.prev_output, flow)).clamp(0.0, 1.0);
    }

    state.prev_output = r.output;
    if (r.motion_map) state.prev_motion_map = r.motion_map;
    state.push(r.output, flow);
    ++state.t;
    return r;
}

double LevelSource::level(const Frame& frame, const std::string& frame_id) const {
    if (fixed) return *fixed;
    if (scorer == nullptr) return 0.0;
    return conditioning::turbulence_level(frame, *scorer, calibration, frame_id).level;
}

RecurrentRestorer::RecurrentRestorer(mitigator::Mitigator model, PipelineConfig config)
    : model_(std::move(model)), config_(std::move(config)) {
    config_.validate();
}

VideoSequence RecurrentRestorer::restore(const VideoSequence& input, const LevelSource& levels, RestoreTrace* trace) {
    input.validate();
    torch::NoGradGuard guard;
    model_->eval();
    VideoSequence out;
    out.id = input.id;
    out.frame_rate = input.frame_rate;
    mitigator::RecurrentState state;
    for (std::size_t t = 0; t < input.length(); ++t) {
        const auto x = tensor::from_frame(input.frames[t], torch::kFloat64);
        if (t == 0) state = mitigator::RecurrentState::initial(x, config_.history);
        const double lv = levels.level(input.frames[t], input.id + "/" + io::frame_name(t));
        const auto level = torch::full({1}, lv, torch::TensorOptions().dtype(torch::kFloat64));
        auto r = process_frame(model_, config_, x, state, level);
        out.frames.push_back(tensor::to_frame(r.output));
        if (trace != nullptr) {
            trace->levels.push_back(lv);
            trace->intermediate.push_back(tensor::to_frame(r.step.o_hat));
            trace->motion_maps.push_back(r.motion_map ? r.motion_map->m : Plane());
            trace->flows.push_back(tensor::to_flow(r.step.flows.final_flow));
        }
    }
    return out;
}

}  // namespace turbrec
