#pragma once

#include "igtrack/anchors.hpp"
#include "igtrack/tensor.hpp"

namespace igtrack {

struct LossReport {
    double l_cls = 0;
    double l_reg = 0;
    double l_iou = 0;
    double total = 0;  // == l_cls + l_reg + l_iou
};

/// Optional ablation weights; the default is the plain unit-weight sum.
struct LossWeights {
    double cls = 1;
    double reg = 1;
    double iou = 1;
};

/// Mean two-class softmax cross-entropy over sampled (non-ignored) anchors.
/// When `grad` is given, grad_scale * dloss/dcls is added to it.
template <class T>
double cls_loss(const BasicTensor<T>& cls, const AnchorLabels& labels, BasicTensor<T>* grad = nullptr,
                double grad_scale = 1.0);

double smooth_l1(double e);

/// Smooth-L1 (knee at 1) summed over the four deltas, averaged over positives.
template <class T>
double reg_loss(const BasicTensor<T>& reg, const AnchorLabels& labels, BasicTensor<T>* grad = nullptr,
                double grad_scale = 1.0);

/// Unit-weight sum. Throws TrainingAbort naming the first non-finite term.
LossReport total_loss(double l_cls, double l_reg, double l_iou);

}  // namespace igtrack
