#pragma once

#include <cmath>
#include <cstdint>

namespace hct {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}
}  // namespace detail

// Counter-based generator: the stream is a pure function of (key, position),
// so per-cell streams derived from (seed, cell index) are reproducible under
// any parallel schedule.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(detail::mix64(detail::mix64(seed) ^ stream)) {}

    std::uint64_t next_u64() { return detail::mix64(key_ ^ detail::mix64(n_++)); }

    // uniform in (0, 1)
    double next_uniform() {
        return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    double next_normal() {
        // Box-Muller, one value per draw
        const double u1 = next_uniform(), u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Poisson sample: inversion by multiplication for small means, Hormann's
    // PTRS transformed rejection for large ones.
    std::uint64_t next_poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 10.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double p = 1.0;
            do {
                ++k;
                p *= next_uniform();
            } while (p > limit);
            return k - 1;
        }
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mean = std::log(mean);
        while (true) {
            const double u = next_uniform() - 0.5;
            double v = next_uniform();
            const double us = 0.5 - std::abs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return std::uint64_t(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                kf * log_mean - mean - std::lgamma(kf + 1.0))
                return std::uint64_t(kf);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t n_ = 0;
};

}  // namespace hct
