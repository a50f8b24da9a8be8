#include "rotadapt/rng.hpp"

#include <cmath>

namespace rotadapt {

uint64_t Rng::uniform_int(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = u64();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // u in (0, 1] so log(u) is finite.
    double u = 1.0 - uniform01();
    double v = uniform01();
    double r = std::sqrt(-2.0 * std::log(u));
    double theta = 2.0 * M_PI * v;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

uint64_t Rng::mix(uint64_t a, uint64_t b) {
    // splitmix64 finalizer over the xor of the inputs.
    uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Rng Rng::derive(uint64_t salt) { return Rng(mix(u64(), salt)); }

}  // namespace rotadapt
