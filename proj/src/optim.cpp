#include "rotadapt/optim.hpp"

#include <cmath>

#include "rotadapt/errors.hpp"

namespace rotadapt {

double lr_at(double progress, double base_lr, double alpha, double beta) {
    if (!(progress >= 0.0 && progress <= 1.0))
        throw InputError("lr_at: progress must be in [0,1]");
    if (!(base_lr > 0.0)) throw InputError("lr_at: base_lr must be positive");
    return base_lr / std::pow(1.0 + alpha * progress, beta);
}

namespace {

void step_group(const std::vector<Param*>& params, SgdState& state, double lr,
                double momentum, double weight_decay) {
    for (Param* p : params) {
        auto& v = state.velocity[p->name];
        if (v.empty()) v.assign(p->w.size(), 0.0);
        for (size_t i = 0; i < p->w.size(); ++i) {
            if (!std::isfinite(p->g[i]))
                throw NumericError("sgd_step: non-finite gradient in " + p->name);
            v[i] = momentum * v[i] + p->g[i] + weight_decay * p->w[i];
            p->w[i] -= lr * v[i];
        }
    }
}

}  // namespace

void sgd_step(Model& model, SgdState& state, double lr_trunk, double lr_heads,
              double momentum, double weight_decay) {
    step_group(model.trunk_params(), state, lr_trunk, momentum, weight_decay);
    step_group(model.head_params(), state, lr_heads, momentum, weight_decay);
}

}  // namespace rotadapt
