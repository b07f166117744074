#pragma once

#include "igtrack/param_store.hpp"

namespace igtrack {

/// Exponential decay from lr_start at epoch 0 to lr_end at epoch total-1;
/// both endpoints are returned exactly.
double lr_schedule(int epoch, int total = 40, double lr_start = 0.005, double lr_end = 0.00005);

/// Classical momentum SGD: v <- momentum*v + g, p <- p - lr*v.
class SgdMomentum {
public:
    explicit SgdMomentum(double momentum = 0.9) : momentum_(momentum) {}

    void step(ParamStore& params, const ParamStore& grads, double lr);

    double momentum() const { return momentum_; }

private:
    double momentum_;
    ParamStore velocity_;
};

/// Single stateless update with a zero initial velocity buffer.
ParamStore sgd_step(const ParamStore& params, const ParamStore& grads, double lr, double momentum);

/// Rescales grads in place so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(ParamStore& grads, double max_norm);

}  // namespace igtrack
