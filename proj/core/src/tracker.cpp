#include "igtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "igtrack/errors.hpp"

namespace igtrack {

Model Model::from_params(ParamStore params, const NetConfig& net) {
    net.validate();
    Model m{net, std::move(params), generate_anchors(anchor_spec_for(net), net.search_size)};
    const ParamStore layout = init_params<float>(net, 0);
    if (!layout.same_layout(m.params)) throw ConfigError("checkpoint does not match the network configuration");
    return m;
}

TrackerMode parse_tracker_mode(const std::string& name) {
    if (name == "base") return TrackerMode::kBase;
    if (name == "ig") return TrackerMode::kIg;
    throw ConfigError("unknown mode '" + name + "' (base|ig)");
}

std::string to_string(TrackerMode mode) { return mode == TrackerMode::kBase ? "base" : "ig"; }

TrackerConfig TrackerConfig::defaults(TrackerMode mode) {
    TrackerConfig c;
    c.mode = mode;
    if (mode == TrackerMode::kBase) {
        c.penalties = true;
        c.window_influence = 0.42;
    }
    return c;
}

std::vector<double> hanning_window(int n) {
    std::vector<double> h(static_cast<std::size_t>(n), 1.0);
    if (n > 1) {
        for (int i = 0; i < n; ++i) h[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / (n - 1));
    }
    std::vector<double> out(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = h[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(j)];
    }
    return out;
}

std::vector<std::size_t> nms(const std::vector<Box>& boxes, const std::vector<double>& scores, double threshold) {
    std::vector<std::size_t> order(boxes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<std::size_t> kept;
    for (std::size_t i : order) {
        bool suppressed = false;
        for (std::size_t k : kept) {
            if (iou(boxes[i], boxes[k]) > threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(i);
    }
    return kept;
}

namespace {

double change(double r) { return std::max(r, 1.0 / r); }

double padded_size(double w, double h) {
    const double p = (w + h) / 2;
    return std::sqrt((w + p) * (h + p));
}

// Candidates considered by the optional NMS stage.
constexpr std::size_t kNmsCandidates = 64;

}  // namespace

void Tracker::init(const Image& frame, const Box& box) {
    require_valid(box, "tracker init box");
    state_ = TrackerState{};
    state_.current_box = box;
    state_.config = config_;
    state_.frame_width = frame.width;
    state_.frame_height = frame.height;
    const Patch z = crop_template(frame, box, model_.net.template_size);
    state_.template_features = embed_template(model_.params, model_.net, z.data);
    initialized_ = true;
}

std::size_t Tracker::select_base(const Tensor& cls, const Tensor& reg, const Box& prev, std::vector<Box>& decoded) const {
    const AnchorGrid& grid = model_.grid;
    const std::vector<double> scores = foreground_scores(cls);
    const std::size_t plane = static_cast<std::size_t>(grid.spec.response_size) * grid.spec.response_size;
    const std::vector<double> window = hanning_window(grid.spec.response_size);
    decoded.resize(grid.size());
    std::vector<double> pscore(grid.size());
    const double prev_size = padded_size(prev.w, prev.h);
    const double prev_ratio = prev.w / prev.h;
    for (std::size_t a = 0; a < grid.size(); ++a) {
        decoded[a] = decode(grid.boxes[a], delta_at(reg, a));
        double s = scores[a];
        if (config_.penalties) {
            const double s_c = change(padded_size(decoded[a].w, decoded[a].h) / prev_size);
            const double r_c = change((decoded[a].w / decoded[a].h) / prev_ratio);
            s *= std::exp(-config_.penalty_k * (r_c * s_c - 1));
        }
        pscore[a] = s * (1 - config_.window_influence) + window[a % plane] * config_.window_influence;
    }
    if (config_.nms) {
        const std::vector<std::size_t> order = top_k_indices(pscore, std::min(kNmsCandidates, pscore.size()));
        std::vector<Box> cand;
        std::vector<double> cand_scores;
        for (std::size_t a : order) {
            cand.push_back(clip_box(decoded[a], grid.search_size, grid.search_size));
            cand_scores.push_back(pscore[a]);
        }
        return order[nms(cand, cand_scores, config_.nms_threshold).front()];
    }
    return top_k_indices(pscore, 1).front();
}

Box Tracker::update(const Image& frame) {
    if (!initialized_) throw UsageError("tracker: update before init");
    const NetConfig& net = model_.net;
    const Patch x = crop_search(frame, state_.current_box, net.template_size, net.search_size);
    const HeadOutput<float> heads = forward_search(model_.params, net, state_.template_features, x.data);
    const Box prev = x.window.to_crop(state_.current_box);

    Box chosen;
    if (config_.mode == TrackerMode::kBase) {
        std::vector<Box> decoded;
        state_.last_anchor = select_base(heads.cls, heads.reg, prev, decoded);
        const Box& best = decoded[state_.last_anchor];
        chosen = {best.cx, best.cy, (1 - config_.alpha) * prev.w + config_.alpha * best.w,
                  (1 - config_.alpha) * prev.h + config_.alpha * best.h};
    } else {
        const ProposalSet proposals = select_topk(heads.cls, heads.reg, model_.grid, config_.top_k);
        Box estimate = prev;
        if (config_.use_motion) {
            const double s = x.window.scale();
            const MotionState motion{prev, state_.vx * s, state_.vy * s};
            estimate = motion_estimate(MotionParams::from_store(model_.params), motion);
        }
        const IouResponse response = iou_response(estimate, proposals);
        const auto best = std::max_element(response.values.begin(), response.values.end()) - response.values.begin();
        state_.last_anchor = proposals.source_index[static_cast<std::size_t>(best)];
        chosen = predict_box(response, proposals, prev, config_.alpha, false, 1.0);
    }

    const Box in_frame = clip_box(x.window.to_frame(chosen), frame.width, frame.height);
    state_.vx = in_frame.cx - state_.current_box.cx;
    state_.vy = in_frame.cy - state_.current_box.cy;
    state_.current_box = in_frame;
    return in_frame;
}

TrackerState track_init(const Model& model, const Image& frame, const Box& box, const TrackerConfig& config) {
    Tracker t(model, config);
    t.init(frame, box);
    return t.state();
}

Box track_frame(const Model& model, TrackerState& state, const Image& frame) {
    Tracker t(model, state.config);
    t.restore(state);
    const Box b = t.update(frame);
    state = t.state();
    return b;
}

std::vector<Box> track_sequence(const Model& model, const SequenceRecord& sequence, const TrackerConfig& config) {
    sequence.validate();
    Tracker t(model, config);
    t.init(sequence.frames[0], sequence.gt[0]);
    std::vector<Box> out{sequence.gt[0]};
    for (std::size_t i = 1; i < sequence.size(); ++i) out.push_back(t.update(sequence.frames[i]));
    return out;
}

}  // namespace igtrack
