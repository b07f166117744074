#include "igtrack/losses.hpp"

#include <algorithm>
#include <cmath>

#include "igtrack/errors.hpp"

namespace igtrack {

namespace {

template <class T>
void ensure_grad(BasicTensor<T>* grad, const BasicTensor<T>& like) {
    if (grad && grad->dims() != like.dims()) {
        if (!grad->empty()) throw ConfigError("loss gradient buffer has the wrong shape");
        *grad = BasicTensor<T>(like.dims());
    }
}

template <class T>
void check_labels(const BasicTensor<T>& out, std::size_t per_anchor, const AnchorLabels& labels) {
    const std::size_t plane = out.dim(1) * out.dim(2);
    if (out.dim(0) % per_anchor != 0 || (out.dim(0) / per_anchor) * plane != labels.label.size()) {
        throw ConfigError("loss: head output does not match the anchor labels");
    }
}

}  // namespace

template <class T>
double cls_loss(const BasicTensor<T>& cls, const AnchorLabels& labels, BasicTensor<T>* grad, double grad_scale) {
    check_labels(cls, 2, labels);
    ensure_grad(grad, cls);
    const std::size_t plane = cls.dim(1) * cls.dim(2);
    std::size_t sampled = 0;
    for (AnchorLabel l : labels.label) sampled += l != AnchorLabel::kIgnore;
    if (sampled == 0) throw PreconditionError("cls_loss: no sampled anchors");

    double sum = 0;
    const double inv = 1.0 / static_cast<double>(sampled);
    for (std::size_t a = 0; a < labels.label.size(); ++a) {
        if (labels.label[a] == AnchorLabel::kIgnore) continue;
        const std::size_t r = a / plane, p = a % plane;
        const std::size_t ib = (2 * r) * plane + p, ifg = (2 * r + 1) * plane + p;
        const double z[2] = {static_cast<double>(cls[ib]), static_cast<double>(cls[ifg])};
        const int y = labels.label[a] == AnchorLabel::kPositive ? 1 : 0;
        const double top = std::max(z[0], z[1]);
        const double lse = top + std::log(std::exp(z[0] - top) + std::exp(z[1] - top));
        sum += lse - z[y];
        if (grad) {
            const double p1 = std::exp(z[1] - lse);
            const double g1 = (p1 - (y == 1 ? 1.0 : 0.0)) * inv * grad_scale;
            (*grad)[ib] += static_cast<T>(-g1);
            (*grad)[ifg] += static_cast<T>(g1);
        }
    }
    return sum * inv;
}

double smooth_l1(double e) {
    const double a = std::abs(e);
    return a < 1.0 ? 0.5 * e * e : a - 0.5;
}

template <class T>
double reg_loss(const BasicTensor<T>& reg, const AnchorLabels& labels, BasicTensor<T>* grad, double grad_scale) {
    check_labels(reg, 4, labels);
    ensure_grad(grad, reg);
    const std::size_t plane = reg.dim(1) * reg.dim(2);
    const std::size_t positives = labels.count(AnchorLabel::kPositive);
    if (positives == 0) throw PreconditionError("reg_loss: no positive anchors");
    const double inv = 1.0 / static_cast<double>(positives);

    double sum = 0;
    for (std::size_t a = 0; a < labels.label.size(); ++a) {
        if (labels.label[a] != AnchorLabel::kPositive) continue;
        const RegressionDelta& t = *labels.target[a];
        const double target[4] = {t.dx, t.dy, t.dw, t.dh};
        const std::size_t r = a / plane, p = a % plane;
        for (std::size_t q = 0; q < 4; ++q) {
            const std::size_t idx = (4 * r + q) * plane + p;
            const double e = static_cast<double>(reg[idx]) - target[q];
            sum += smooth_l1(e);
            if (grad) {
                const double d = std::abs(e) < 1.0 ? e : (e > 0 ? 1.0 : -1.0);
                (*grad)[idx] += static_cast<T>(d * inv * grad_scale);
            }
        }
    }
    return sum * inv;
}

LossReport total_loss(double l_cls, double l_reg, double l_iou) {
    if (!std::isfinite(l_cls)) throw TrainingAbort("non-finite loss component l_cls");
    if (!std::isfinite(l_reg)) throw TrainingAbort("non-finite loss component l_reg");
    if (!std::isfinite(l_iou)) throw TrainingAbort("non-finite loss component l_iou");
    return {l_cls, l_reg, l_iou, l_cls + l_reg + l_iou};
}

template double cls_loss<float>(const Tensor&, const AnchorLabels&, Tensor*, double);
template double cls_loss<double>(const BasicTensor<double>&, const AnchorLabels&, BasicTensor<double>*, double);
template double reg_loss<float>(const Tensor&, const AnchorLabels&, Tensor*, double);
template double reg_loss<double>(const BasicTensor<double>&, const AnchorLabels&, BasicTensor<double>*, double);

}  // namespace igtrack
