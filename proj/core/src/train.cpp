#include "igtrack/train.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "igtrack/errors.hpp"
#include "igtrack/optim.hpp"
#include "igtrack/rng.hpp"

namespace igtrack {

template <class T>
PairEvaluation<T> evaluate_pair(const BasicParamStore<T>& params, const NetConfig& net, const AnchorGrid& grid,
                                const BasicTensor<T>& template_patch, const BasicTensor<T>& search_patch,
                                const Box& gt, const MotionState& motion, const AnchorLabels& labels,
                                const PairObjective& objective, bool with_grads) {
    ForwardResult<T> fwd = forward(params, net, template_patch, search_patch);
    BasicTensor<T> d_cls(fwd.cls.dims());
    BasicTensor<T> d_reg(fwd.reg.dims());
    const LossWeights& w = objective.weights;
    const double l_cls = cls_loss(fwd.cls, labels, with_grads ? &d_cls : nullptr, w.cls);
    const double l_reg = reg_loss(fwd.reg, labels, with_grads ? &d_reg : nullptr, w.reg);

    PairEvaluation<T> out;
    double l_iou = 0;
    MotionParams d_motion;
    if (objective.iou_term) {
        const IouModuleTrace trace = iou_module_forward(fwd.cls, fwd.reg, grid, MotionParams::from_store(params),
                                                        motion, gt, objective.iou);
        l_iou = trace.loss;
        out.branch_signature = trace.branch_signature();
        if (with_grads) iou_module_backward(trace, grid, w.iou, d_reg, d_motion);
    }
    out.loss = total_loss(w.cls * l_cls, w.reg * l_reg, w.iou * l_iou);
    out.relu_signature = fwd.tape.relu_signature();
    if (with_grads) {
        out.grads = backward(fwd.tape, d_cls, d_reg);
        d_motion.add_to_store(out.grads);
    }
    return out;
}

template PairEvaluation<float> evaluate_pair<float>(const ParamStore&, const NetConfig&, const AnchorGrid&,
                                                    const Tensor&, const Tensor&, const Box&, const MotionState&,
                                                    const AnchorLabels&, const PairObjective&, bool);
template PairEvaluation<double> evaluate_pair<double>(const BasicParamStore<double>&, const NetConfig&,
                                                      const AnchorGrid&, const BasicTensor<double>&,
                                                      const BasicTensor<double>&, const Box&, const MotionState&,
                                                      const AnchorLabels&, const PairObjective&, bool);

void TrainConfig::validate() const {
    net.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (steps_per_epoch < 1) throw ConfigError("steps_per_epoch must be >= 1");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (!(lr_start > 0) || !(lr_end > 0)) throw ConfigError("learning rates must be positive");
    if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must be in [0, 1)");
    if (max_gap < 0) throw ConfigError("max_gap must be >= 0");
    if (iou.top_k < 1) throw ConfigError("top_k must be >= 1");
    if (iou.alpha < 0 || iou.alpha > 1) throw ConfigError("alpha must be in [0, 1]");
    if (!(iou.beta > 0)) throw ConfigError("beta must be positive");
}

namespace {

// Shortest round-trip digits in plain decimal form (0.00005, not 5e-05).
std::string fixed(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    return {buf, r.ptr};
}

}  // namespace

void write_log_header(std::ostream& os, const TrainConfig& c) {
    os << "# mode=" << to_string(c.mode) << " epochs=" << c.epochs << " steps_per_epoch=" << c.steps_per_epoch
       << " batch=" << c.batch << " seed=" << c.seed << '\n';
    os << "# lr_start=" << fixed(c.lr_start) << " lr_end=" << fixed(c.lr_end) << " momentum=" << fixed(c.momentum)
       << " top_k=" << c.iou.top_k << " alpha=" << fixed(c.iou.alpha) << " beta=" << fixed(c.iou.beta) << '\n';
    os << "epoch step l_cls l_reg l_iou total lr\n";
}

void write_log_line(std::ostream& os, const StepLog& e) {
    char line[160];
    std::snprintf(line, sizeof line, "%d %d %.6f %.6f %.6f %.6f %.6g\n", e.epoch, e.step, e.loss.l_cls, e.loss.l_reg,
                  e.loss.l_iou, e.loss.total, e.lr);
    os << line;
}

namespace {

MotionState motion_of(const TrainingPair& pair) { return {pair.prev_in_search, pair.vx, pair.vy}; }

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& config, const std::function<void(const StepLog&)>& on_step) {
    config.validate();
    if (dataset.empty()) throw PreconditionError("train: empty dataset");
    const NetConfig& net = config.net;
    const AnchorGrid grid = generate_anchors(anchor_spec_for(net), net.search_size);
    const PairObjective objective{config.mode == TrackerMode::kIg, config.iou, config.weights};

    TrainResult result{init_params<float>(net, config.seed), {}};
    SgdMomentum optimizer(config.momentum);
    std::uint64_t pair_counter = 0;
    const double inv_batch = 1.0 / config.batch;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = lr_schedule(epoch, config.epochs, config.lr_start, config.lr_end);
        for (int step = 0; step < config.steps_per_epoch; ++step) {
            ParamStore grads = result.params.zeros_like();
            LossReport mean;
            for (int b = 0; b < config.batch; ++b) {
                const std::uint64_t pair_seed = mix_seed(config.seed, ++pair_counter);
                const TrainingPair pair =
                    sample_pair(dataset, pair_seed, config.max_gap, net.template_size, net.search_size);
                const AnchorLabels labels =
                    assign_anchor_labels(grid, pair.gt_in_search, config.labels, mix_seed(pair_seed, 1));
                const PairEvaluation<float> ev =
                    evaluate_pair(result.params, net, grid, pair.template_patch, pair.search_patch, pair.gt_in_search,
                                  motion_of(pair), labels, objective, true);
                grads.add_scaled(ev.grads, static_cast<float>(inv_batch));
                mean.l_cls += ev.loss.l_cls * inv_batch;
                mean.l_reg += ev.loss.l_reg * inv_batch;
                mean.l_iou += ev.loss.l_iou * inv_batch;
            }
            mean = total_loss(mean.l_cls, mean.l_reg, mean.l_iou);
            if (!grads.all_finite()) throw TrainingAbort("non-finite gradient");
            if (config.grad_clip > 0) clip_grad_norm(grads, config.grad_clip);
            optimizer.step(result.params, grads, lr);
            if (!result.params.all_finite()) throw TrainingAbort("non-finite parameters after update");
            const StepLog entry{epoch, step, mean, lr};
            result.log.push_back(entry);
            if (on_step) on_step(entry);
        }
    }
    return result;
}

IouModuleStats evaluate_iou_module(const Model& model, const Dataset& dataset, std::size_t pairs, std::uint64_t seed,
                                   int max_gap, const IouModuleConfig& config) {
    if (pairs == 0) throw PreconditionError("evaluate_iou_module: pairs must be positive");
    const NetConfig& net = model.net;
    const MotionParams motion = MotionParams::from_store(model.params);
    IouModuleStats s;
    s.pairs = pairs;
    for (std::size_t i = 0; i < pairs; ++i) {
        const TrainingPair pair = sample_pair(dataset, mix_seed(seed, i), max_gap, net.template_size, net.search_size);
        const HeadOutput<float> heads = forward_search(model.params, net, embed_template(model.params, net, pair.template_patch),
                                                       pair.search_patch);
        const MotionState state = motion_of(pair);
        const IouModuleTrace trace =
            iou_module_forward(heads.cls, heads.reg, model.grid, motion, state, pair.gt_in_search, config);
        const Box hard = predict_box(trace.response, trace.proposals, state.prev_box, config.alpha, false, config.beta);
        s.l_iou += trace.loss;
        s.pred_iou += iou(hard, pair.gt_in_search);
        s.estimate_iou += iou(trace.estimate, pair.gt_in_search);
        s.zero_velocity_iou += iou(state.prev_box, pair.gt_in_search);
    }
    const auto n = static_cast<double>(pairs);
    s.l_iou /= n;
    s.pred_iou /= n;
    s.estimate_iou /= n;
    s.zero_velocity_iou /= n;
    return s;
}

}  // namespace igtrack
