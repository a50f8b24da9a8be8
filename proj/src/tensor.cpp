#include "rotadapt/tensor.hpp"

#include <cmath>

namespace rotadapt {

bool all_finite(const Tensor& t) { return all_finite(t.v); }

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace rotadapt
