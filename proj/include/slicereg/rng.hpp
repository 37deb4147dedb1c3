#pragma once

#include <cmath>
#include <cstdint>

namespace slicereg {

// splitmix64; used everywhere randomness is needed so results do not depend on
// the standard library's distribution implementations.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Small deterministic RNG. A stream is fully determined by its seed, so
/// per-task streams can be derived with Rng(seed, task_index) and consumed in
/// any schedule without changing results.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // decorrelate nearby seeds
        splitmix64(state_);
        splitmix64(state_);
    }
    Rng(uint64_t seed, uint64_t stream) : Rng(seed ^ (0x9E3779B97F4A7C15ull * (stream + 1))) {}

    uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0,n), n >= 1.
    uint64_t below(uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    uint64_t state_;
};

}  // namespace slicereg
