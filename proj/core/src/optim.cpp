#include "igtrack/optim.hpp"

#include <cmath>
#include <string>

#include "igtrack/errors.hpp"

namespace igtrack {

double lr_schedule(int epoch, int total, double lr_start, double lr_end) {
    if (total < 1 || epoch < 0 || epoch >= total) {
        throw PreconditionError("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                                std::to_string(total) + ")");
    }
    if (!(lr_start > 0) || !(lr_end > 0)) throw PreconditionError("lr_schedule: rates must be positive");
    if (epoch == 0) return lr_start;
    if (epoch == total - 1) return lr_end;
    const double t = static_cast<double>(epoch) / static_cast<double>(total - 1);
    return lr_start * std::pow(lr_end / lr_start, t);
}

void SgdMomentum::step(ParamStore& params, const ParamStore& grads, double lr) {
    params.require_same_layout(grads, "sgd_step");
    if (velocity_.size() == 0) velocity_ = params.zeros_like();
    velocity_.require_same_layout(params, "sgd_step");
    const float mu = static_cast<float>(momentum_);
    const float rate = static_cast<float>(lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params.entry(i).second;
        Tensor& v = velocity_.entry(i).second;
        const Tensor& g = grads.entry(i).second;
        for (std::size_t k = 0; k < p.size(); ++k) {
            v[k] = mu * v[k] + g[k];
            p[k] -= rate * v[k];
        }
    }
}

ParamStore sgd_step(const ParamStore& params, const ParamStore& grads, double lr, double momentum) {
    ParamStore out = params;
    SgdMomentum opt(momentum);
    opt.step(out, grads, lr);
    return out;
}

double clip_grad_norm(ParamStore& grads, double max_norm) {
    double sq = 0;
    for (const auto& e : grads) {
        for (float v : e.second.values()) sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) grads.scale(static_cast<float>(max_norm / norm));
    return norm;
}

}  // namespace igtrack
