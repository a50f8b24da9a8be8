#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rotadapt {

// Seeded random source with hand-rolled distributions so that streams are
// reproducible across standard library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n), rejection-sampled to remove modulo bias.
    uint64_t uniform_int(uint64_t n);

    // Standard normal via Box-Muller.
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    // Independent child stream; advances this stream by one draw. Distinct
    // salts yield unrelated children from the same parent state.
    Rng derive(uint64_t salt);

    static uint64_t mix(uint64_t a, uint64_t b);

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rotadapt
