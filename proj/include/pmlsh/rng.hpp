#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace pmlsh {

// Deterministic random source. std::mt19937_64 is bit-reproducible across
// platforms, but the standard distributions are not, so the draws we need
// (bounded ints, unit reals, normals) are implemented here directly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, bound). Rejection sampling, no modulo bias.
    std::uint64_t uniform_u64(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % bound;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform_real() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform_real(double lo, double hi) {
        return lo + (hi - lo) * uniform_real();
    }

    // Standard normal via Box-Muller; caches the second variate.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform_real();
        } while (u1 <= 0.0);
        u2 = uniform_real();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = mag * std::sin(ang);
        has_spare_ = true;
        return mag * std::cos(ang);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace pmlsh
