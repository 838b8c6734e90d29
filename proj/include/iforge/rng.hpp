#pragma once

#include "iforge/types.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace iforge {

// mt19937_64 output is pinned by the standard; the derived uniform/normal
// draws below avoid std::*_distribution, whose streams vary per toolchain.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t below(std::uint64_t n) { return eng_() % n; } // fine for small n

    // Marsaglia polar method; deterministic given the engine stream.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    Vec normal_vec(std::size_t d) {
        Vec x(d);
        for (double& c : x) c = normal();
        return x;
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace iforge
