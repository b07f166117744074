#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "igtrack/anchors.hpp"
#include "igtrack/geometry.hpp"
#include "igtrack/param_store.hpp"
#include "igtrack/tensor.hpp"

namespace igtrack {

/// Top-K image-domain proposals in search-image pixels, best score first.
struct ProposalSet {
    std::vector<Box> boxes;
    std::vector<double> scores;  // foreground probability
    std::vector<std::size_t> source_index;

    std::size_t size() const { return boxes.size(); }
};

/// Previous box and per-step velocity, both in search-image pixels.
struct MotionState {
    Box prev_box;
    double vx = 0;
    double vy = 0;
};

struct IouResponse {
    std::vector<double> values;
};

/// Motion block inputs are divided by kMotionInputScale; residual outputs are
/// multiplied by kMotionOutputScale (both in pixels).
inline constexpr double kMotionInputScale = 64.0;
inline constexpr double kMotionOutputScale = 4.0;

/// Affine motion block: 6 inputs (cx, cy, w, h, vx, vy) -> 4-vector residual on
/// top of the constant-velocity extrapolation. Stored in the ParamStore as
/// "motion.weight" (4x6, row-major) and "motion.bias" (4).
struct MotionParams {
    std::array<double, 24> weight{};
    std::array<double, 4> bias{};

    template <class T>
    static MotionParams from_store(const BasicParamStore<T>& params);
    template <class T>
    void add_to_store(BasicParamStore<T>& params) const;
};

struct IouModuleConfig {
    int top_k = 5;
    double alpha = 0.3;  // weight of the new size in the size interpolation
    double beta = 10.0;  // sharpness of the training-time soft selection
};

/// Foreground probability of every anchor (softmax over the class pair).
template <class T>
std::vector<double> foreground_scores(const BasicTensor<T>& cls);

/// Regression output of one anchor in (ratio, row, col) order.
template <class T>
RegressionDelta delta_at(const BasicTensor<T>& reg, std::size_t anchor);

/// Indices of the k best scores, ties broken by the lower index.
std::vector<std::size_t> top_k_indices(const std::vector<double>& scores, std::size_t k);

/// Decode the K highest-scoring anchors and clip them to the search image.
template <class T>
ProposalSet select_topk(const BasicTensor<T>& cls, const BasicTensor<T>& reg, const AnchorGrid& grid, int k);

/// Constant-velocity extrapolation plus the learned residual. Sizes below one
/// pixel are clamped and reported through `clamped`.
Box motion_estimate(const MotionParams& motion, const MotionState& state, bool* clamped = nullptr);

IouResponse iou_response(const Box& estimated, const ProposalSet& proposals);

/// Evaluation mode takes the response argmax (lowest index on ties); training
/// mode blends proposals with softmax(beta * response) weights. The result
/// keeps the selected center and interpolates the size:
/// (1 - alpha) * prev + alpha * selected.
Box predict_box(const IouResponse& response, const ProposalSet& proposals, const Box& prev, double alpha,
                bool train_mode, double beta);

/// 1 - iou(pred, gt).
double iou_loss(const Box& pred, const Box& gt);

/// Intermediate values of the differentiable path
/// reg -> decode -> clip -> soft select -> interpolate -> iou_loss.
struct IouModuleTrace {
    ProposalSet proposals;
    std::vector<RegressionDelta> deltas;
    std::vector<std::array<bool, 2>> size_clamped;  // (dw, dh) hit kDeltaClamp
    std::vector<ClipResult> clips;
    MotionState state;
    Box estimate;
    std::array<bool, 2> estimate_clamped{};  // (w, h) raised to one pixel
    IouResponse response;
    std::vector<double> weights;
    Box selected;
    Box pred;
    Box gt;
    double alpha = 0;
    double beta = 0;
    double loss = 0;

    /// Discrete branch choices (selection, clamps, clipping, edge orderings).
    /// Finite differences are only meaningful between passes that agree here.
    std::vector<int> branch_signature() const;
};

template <class T>
IouModuleTrace iou_module_forward(const BasicTensor<T>& cls, const BasicTensor<T>& reg, const AnchorGrid& grid,
                                  const MotionParams& motion, const MotionState& state, const Box& gt,
                                  const IouModuleConfig& config);

/// Accumulates d(loss_scale * loss) into d_reg (shape of reg) and d_motion.
template <class T>
void iou_module_backward(const IouModuleTrace& trace, const AnchorGrid& grid, double loss_scale,
                         BasicTensor<T>& d_reg, MotionParams& d_motion);

}  // namespace igtrack
