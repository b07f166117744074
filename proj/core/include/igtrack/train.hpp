#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "igtrack/anchors.hpp"
#include "igtrack/crop.hpp"
#include "igtrack/iou_module.hpp"
#include "igtrack/losses.hpp"
#include "igtrack/net.hpp"
#include "igtrack/tracker.hpp"

namespace igtrack {

/// Which loss terms contribute. Base mode drops the IOU module entirely.
struct PairObjective {
    bool iou_term = true;
    IouModuleConfig iou;
    LossWeights weights;
};

template <class T>
struct PairEvaluation {
    LossReport loss;
    BasicParamStore<T> grads;      // empty unless requested
    std::vector<bool> relu_signature;
    std::vector<int> branch_signature;
};

/// Forward, losses and (optionally) the full backward pass for one pair.
template <class T>
PairEvaluation<T> evaluate_pair(const BasicParamStore<T>& params, const NetConfig& net, const AnchorGrid& grid,
                                const BasicTensor<T>& template_patch, const BasicTensor<T>& search_patch,
                                const Box& gt, const MotionState& motion, const AnchorLabels& labels,
                                const PairObjective& objective, bool with_grads);

struct TrainConfig {
    TrackerMode mode = TrackerMode::kIg;
    NetConfig net = NetConfig::standard();
    int epochs = 40;
    int steps_per_epoch = 60;
    int batch = 4;
    double lr_start = 0.005;
    double lr_end = 0.00005;
    double momentum = 0.9;
    double grad_clip = 10.0;  // global norm; <= 0 disables
    int max_gap = 10;
    std::uint64_t seed = 1;
    LabelConfig labels;
    IouModuleConfig iou;
    LossWeights weights;

    void validate() const;
};

struct StepLog {
    int epoch = 0;
    int step = 0;
    LossReport loss;
    double lr = 0;
};

/// Writes "# key=value" provenance lines and the column header.
void write_log_header(std::ostream& os, const TrainConfig& config);
/// "epoch step l_cls l_reg l_iou total lr"
void write_log_line(std::ostream& os, const StepLog& entry);

struct TrainResult {
    ParamStore params;
    std::vector<StepLog> log;
};

/// Momentum SGD over sampled pairs. Throws TrainingAbort on a non-finite loss.
TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  const std::function<void(const StepLog&)>& on_step = {});

struct IouModuleStats {
    std::size_t pairs = 0;
    double l_iou = 0;             // training-mode (soft selection) loss
    double pred_iou = 0;          // evaluation-mode prediction vs gt
    double estimate_iou = 0;      // motion estimate vs gt
    double zero_velocity_iou = 0; // previous box vs gt
};

/// Means over `pairs` pairs sampled from `dataset` with a fixed seed.
IouModuleStats evaluate_iou_module(const Model& model, const Dataset& dataset, std::size_t pairs, std::uint64_t seed,
                                   int max_gap, const IouModuleConfig& config = {});

}  // namespace igtrack
