#pragma once

#include <map>
#include <string>
#include <vector>

#include "rotadapt/model.hpp"

namespace rotadapt {

// Inverse-decay annealing: base_lr / (1 + alpha*p)^beta, p in [0,1].
double lr_at(double progress, double base_lr, double alpha = 10.0, double beta = 0.75);

struct SgdState {
    std::map<std::string, std::vector<double>> velocity;  // keyed by parameter name
};

// Classical momentum: v <- m*v + g + wd*theta; theta <- theta - lr*v.
// Trunk parameters use lr_trunk, both heads lr_heads.
void sgd_step(Model& model, SgdState& state, double lr_trunk, double lr_heads,
              double momentum, double weight_decay);

}  // namespace rotadapt
