#include "igtrack/iou_module.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "igtrack/errors.hpp"

namespace igtrack {

template <class T>
MotionParams MotionParams::from_store(const BasicParamStore<T>& params) {
    MotionParams m;
    const auto& w = params.at("motion.weight");
    const auto& b = params.at("motion.bias");
    if (w.size() != m.weight.size() || b.size() != m.bias.size()) throw ConfigError("motion block has wrong shape");
    for (std::size_t i = 0; i < m.weight.size(); ++i) m.weight[i] = static_cast<double>(w[i]);
    for (std::size_t i = 0; i < m.bias.size(); ++i) m.bias[i] = static_cast<double>(b[i]);
    return m;
}

template <class T>
void MotionParams::add_to_store(BasicParamStore<T>& params) const {
    auto& w = params.at("motion.weight");
    auto& b = params.at("motion.bias");
    for (std::size_t i = 0; i < weight.size(); ++i) w[i] += static_cast<T>(weight[i]);
    for (std::size_t i = 0; i < bias.size(); ++i) b[i] += static_cast<T>(bias[i]);
}

template <class T>
std::vector<double> foreground_scores(const BasicTensor<T>& cls) {
    const std::size_t k = cls.dim(0) / 2, plane = cls.dim(1) * cls.dim(2);
    std::vector<double> scores(k * plane);
    for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t p = 0; p < plane; ++p) {
            const double bg = cls[(2 * r) * plane + p];
            const double fg = cls[(2 * r + 1) * plane + p];
            scores[r * plane + p] = 1.0 / (1.0 + std::exp(bg - fg));
        }
    }
    return scores;
}

template <class T>
RegressionDelta delta_at(const BasicTensor<T>& reg, std::size_t anchor) {
    const std::size_t plane = reg.dim(1) * reg.dim(2);
    const std::size_t r = anchor / plane, p = anchor % plane;
    return {static_cast<double>(reg[(4 * r + 0) * plane + p]), static_cast<double>(reg[(4 * r + 1) * plane + p]),
            static_cast<double>(reg[(4 * r + 2) * plane + p]), static_cast<double>(reg[(4 * r + 3) * plane + p])};
}

std::vector<std::size_t> top_k_indices(const std::vector<double>& scores, std::size_t k) {
    if (k < 1 || k > scores.size()) throw PreconditionError("top-k: k must be in [1, anchor count]");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
    idx.resize(k);
    return idx;
}

namespace {

template <class T>
void check_heads(const BasicTensor<T>& cls, const BasicTensor<T>& reg, const AnchorGrid& grid) {
    const std::size_t k = grid.spec.ratios.size(), R = static_cast<std::size_t>(grid.spec.response_size);
    if (cls.dims() != std::vector<std::size_t>{2 * k, R, R} || reg.dims() != std::vector<std::size_t>{4 * k, R, R}) {
        throw ConfigError("head outputs do not match the anchor grid");
    }
}

int pair_signature(const Box& a, const Box& b) {
    auto cmp = [](double x, double y) { return x < y ? 0 : (x == y ? 1 : 2); };
    const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
    const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
    const int overlap = (iw > 0 && ih > 0) ? 1 : 0;
    return overlap + 2 * (cmp(a.x1(), b.x1()) + 3 * (cmp(a.x2(), b.x2()) + 3 * (cmp(a.y1(), b.y1()) + 3 * cmp(a.y2(), b.y2()))));
}

}  // namespace

template <class T>
ProposalSet select_topk(const BasicTensor<T>& cls, const BasicTensor<T>& reg, const AnchorGrid& grid, int k) {
    check_heads(cls, reg, grid);
    if (k < 1 || static_cast<std::size_t>(k) > grid.size()) {
        throw PreconditionError("select_topk: K must be in [1, " + std::to_string(grid.size()) + "]");
    }
    const std::vector<double> scores = foreground_scores(cls);
    ProposalSet out;
    for (std::size_t a : top_k_indices(scores, static_cast<std::size_t>(k))) {
        const Box decoded = decode(grid.boxes[a], delta_at(reg, a));
        out.boxes.push_back(clip_box(decoded, grid.search_size, grid.search_size));
        out.scores.push_back(scores[a]);
        out.source_index.push_back(a);
    }
    return out;
}

namespace {

std::array<double, 6> motion_input(const MotionState& s) {
    return {s.prev_box.cx, s.prev_box.cy, s.prev_box.w, s.prev_box.h, s.vx, s.vy};
}

}  // namespace

namespace {

// Unclamped (cx, cy, w, h) output of the motion block.
std::array<double, 4> motion_raw(const MotionParams& motion, const MotionState& state) {
    require_valid(state.prev_box, "motion_estimate: prev_box");
    if (!std::isfinite(state.vx) || !std::isfinite(state.vy)) {
        throw PreconditionError("motion_estimate: velocity must be finite");
    }
    const std::array<double, 6> in = motion_input(state);
    std::array<double, 4> out = {in[0] + in[4], in[1] + in[5], in[2], in[3]};
    for (std::size_t r = 0; r < 4; ++r) {
        double acc = motion.bias[r];
        for (std::size_t c = 0; c < 6; ++c) acc += motion.weight[r * 6 + c] * (in[c] / kMotionInputScale);
        out[r] += kMotionOutputScale * acc;
    }
    return out;
}

}  // namespace

Box motion_estimate(const MotionParams& motion, const MotionState& state, bool* clamped) {
    const std::array<double, 4> out = motion_raw(motion, state);
    if (clamped) *clamped = !(out[2] >= 1.0) || !(out[3] >= 1.0);
    return {out[0], out[1], std::max(out[2], 1.0), std::max(out[3], 1.0)};
}

IouResponse iou_response(const Box& estimated, const ProposalSet& proposals) {
    IouResponse r;
    r.values.reserve(proposals.size());
    for (const Box& b : proposals.boxes) r.values.push_back(iou(estimated, b));
    return r;
}

namespace {

std::vector<double> softmax(const std::vector<double>& values, double beta) {
    const double top = *std::max_element(values.begin(), values.end());
    std::vector<double> w(values.size());
    double sum = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        w[i] = std::exp(beta * (values[i] - top));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

Box blend(const std::vector<Box>& boxes, const std::vector<double>& weights) {
    Box p{0, 0, 0, 0};
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        p.cx += weights[i] * boxes[i].cx;
        p.cy += weights[i] * boxes[i].cy;
        p.w += weights[i] * boxes[i].w;
        p.h += weights[i] * boxes[i].h;
    }
    return p;
}

Box interpolate_size(const Box& selected, const Box& prev, double alpha) {
    return {selected.cx, selected.cy, (1 - alpha) * prev.w + alpha * selected.w, (1 - alpha) * prev.h + alpha * selected.h};
}

void check_predict_args(const IouResponse& response, const ProposalSet& proposals, double alpha, double beta) {
    if (proposals.size() == 0) throw PreconditionError("predict_box: empty proposal set");
    if (response.values.size() != proposals.size()) throw PreconditionError("predict_box: response/proposal size mismatch");
    if (!(alpha >= 0 && alpha <= 1)) throw PreconditionError("predict_box: alpha must be in [0, 1]");
    if (!(beta > 0)) throw PreconditionError("predict_box: beta must be positive");
}

}  // namespace

Box predict_box(const IouResponse& response, const ProposalSet& proposals, const Box& prev, double alpha,
                bool train_mode, double beta) {
    check_predict_args(response, proposals, alpha, beta);
    require_valid(prev, "predict_box: prev");
    Box selected;
    if (train_mode) {
        selected = blend(proposals.boxes, softmax(response.values, beta));
    } else {
        const auto best = std::max_element(response.values.begin(), response.values.end());
        selected = proposals.boxes[static_cast<std::size_t>(best - response.values.begin())];
    }
    if (alpha == 1.0) return selected;
    return interpolate_size(selected, prev, alpha);
}

double iou_loss(const Box& pred, const Box& gt) { return 1.0 - iou(pred, gt); }

std::vector<int> IouModuleTrace::branch_signature() const {
    std::vector<int> sig;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        sig.push_back(static_cast<int>(proposals.source_index[i]));
        sig.push_back(size_clamped[i][0] + 2 * size_clamped[i][1]);
        sig.push_back(clips[i].degenerate ? 1 : 0);
        for (double v : clips[i].jacobian) sig.push_back(static_cast<int>(v * 4));
        sig.push_back(pair_signature(estimate, proposals.boxes[i]));
    }
    sig.push_back(estimate_clamped[0] + 2 * estimate_clamped[1]);
    sig.push_back(pair_signature(pred, gt));
    return sig;
}

template <class T>
IouModuleTrace iou_module_forward(const BasicTensor<T>& cls, const BasicTensor<T>& reg, const AnchorGrid& grid,
                                  const MotionParams& motion, const MotionState& state, const Box& gt,
                                  const IouModuleConfig& config) {
    check_heads(cls, reg, grid);
    require_valid(gt, "iou module: gt");
    if (config.top_k < 1 || static_cast<std::size_t>(config.top_k) > grid.size()) {
        throw PreconditionError("iou module: top_k must be in [1, anchor count]");
    }
    IouModuleTrace t;
    t.state = state;
    t.gt = gt;
    t.alpha = config.alpha;
    t.beta = config.beta;
    const std::vector<double> scores = foreground_scores(cls);
    for (std::size_t a : top_k_indices(scores, static_cast<std::size_t>(config.top_k))) {
        const RegressionDelta d = delta_at(reg, a);
        bool any_clamp = false;
        const Box decoded = decode(grid.boxes[a], d, &any_clamp);
        t.deltas.push_back(d);
        t.size_clamped.push_back({std::abs(d.dw) > kDeltaClamp, std::abs(d.dh) > kDeltaClamp});
        t.clips.push_back(clip_box_with_jacobian(decoded, grid.search_size, grid.search_size));
        t.proposals.boxes.push_back(t.clips.back().box);
        t.proposals.scores.push_back(scores[a]);
        t.proposals.source_index.push_back(a);
    }
    const std::array<double, 4> raw = motion_raw(motion, state);
    t.estimate_clamped = {!(raw[2] >= 1.0), !(raw[3] >= 1.0)};
    t.estimate = motion_estimate(motion, state);
    t.response = iou_response(t.estimate, t.proposals);
    check_predict_args(t.response, t.proposals, config.alpha, config.beta);
    t.weights = softmax(t.response.values, config.beta);
    t.selected = blend(t.proposals.boxes, t.weights);
    t.pred = interpolate_size(t.selected, state.prev_box, config.alpha);
    t.loss = iou_loss(t.pred, gt);
    return t;
}

template <class T>
void iou_module_backward(const IouModuleTrace& t, const AnchorGrid& grid, double loss_scale, BasicTensor<T>& d_reg,
                         MotionParams& d_motion) {
    const std::size_t n = t.proposals.size();
    // loss = 1 - iou(pred, gt)
    const BoxGrad gi = iou_gradient(t.pred, t.gt);
    const BoxGrad g_pred = {-loss_scale * gi[0], -loss_scale * gi[1], -loss_scale * gi[2], -loss_scale * gi[3]};
    // pred = (sel.cx, sel.cy, (1-a) prev.w + a sel.w, ...)
    const BoxGrad g_sel = {g_pred[0], g_pred[1], t.alpha * g_pred[2], t.alpha * g_pred[3]};

    std::vector<BoxGrad> g_box(n);
    std::vector<double> g_w(n);
    double mean_gw = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Box& b = t.proposals.boxes[i];
        for (int c = 0; c < 4; ++c) g_box[i][c] = t.weights[i] * g_sel[c];
        g_w[i] = g_sel[0] * b.cx + g_sel[1] * b.cy + g_sel[2] * b.w + g_sel[3] * b.h;
        mean_gw += t.weights[i] * g_w[i];
    }
    BoxGrad g_est{0, 0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const double g_v = t.beta * t.weights[i] * (g_w[i] - mean_gw);
        if (g_v == 0) continue;
        const BoxGrad de = iou_gradient(t.estimate, t.proposals.boxes[i]);
        const BoxGrad db = iou_gradient(t.proposals.boxes[i], t.estimate);
        for (int c = 0; c < 4; ++c) {
            g_est[c] += g_v * de[c];
            g_box[i][c] += g_v * db[c];
        }
    }

    const std::size_t plane = d_reg.dim(1) * d_reg.dim(2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& jac = t.clips[i].jacobian;
        BoxGrad g_dec{0, 0, 0, 0};
        for (int r = 0; r < 4; ++r) {
            for (int c = 0; c < 4; ++c) g_dec[c] += jac[r * 4 + c] * g_box[i][r];
        }
        const std::size_t a = t.proposals.source_index[i];
        const Box& anchor = grid.boxes[a];
        const RegressionDelta& d = t.deltas[i];
        const double gdx = g_dec[0] * anchor.w;
        const double gdy = g_dec[1] * anchor.h;
        const double gdw = t.size_clamped[i][0] ? 0.0 : g_dec[2] * anchor.w * std::exp(d.dw);
        const double gdh = t.size_clamped[i][1] ? 0.0 : g_dec[3] * anchor.h * std::exp(d.dh);
        const std::size_t r = a / plane, p = a % plane;
        d_reg[(4 * r + 0) * plane + p] += static_cast<T>(gdx);
        d_reg[(4 * r + 1) * plane + p] += static_cast<T>(gdy);
        d_reg[(4 * r + 2) * plane + p] += static_cast<T>(gdw);
        d_reg[(4 * r + 3) * plane + p] += static_cast<T>(gdh);
    }

    // estimate = base(state) + O * (A (x / I) + b); sizes clamped at one pixel.
    const std::array<double, 6> in = motion_input(t.state);
    for (std::size_t r = 0; r < 4; ++r) {
        const double g = (r >= 2 && t.estimate_clamped[r - 2]) ? 0.0 : g_est[r];
        d_motion.bias[r] += g * kMotionOutputScale;
        for (std::size_t c = 0; c < 6; ++c) d_motion.weight[r * 6 + c] += g * kMotionOutputScale * in[c] / kMotionInputScale;
    }
}

#define IGTRACK_INSTANTIATE_IOU(T)                                                                                  \
    template MotionParams MotionParams::from_store<T>(const BasicParamStore<T>&);                                  \
    template void MotionParams::add_to_store<T>(BasicParamStore<T>&) const;                                        \
    template std::vector<double> foreground_scores<T>(const BasicTensor<T>&);                                      \
    template RegressionDelta delta_at<T>(const BasicTensor<T>&, std::size_t);                                      \
    template ProposalSet select_topk<T>(const BasicTensor<T>&, const BasicTensor<T>&, const AnchorGrid&, int);     \
    template IouModuleTrace iou_module_forward<T>(const BasicTensor<T>&, const BasicTensor<T>&, const AnchorGrid&, \
                                                  const MotionParams&, const MotionState&, const Box&,             \
                                                  const IouModuleConfig&);                                         \
    template void iou_module_backward<T>(const IouModuleTrace&, const AnchorGrid&, double, BasicTensor<T>&,       \
                                         MotionParams&);

IGTRACK_INSTANTIATE_IOU(float)
IGTRACK_INSTANTIATE_IOU(double)

}  // namespace igtrack
