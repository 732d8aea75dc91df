#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

// Deterministic sampling helpers. std::mt19937_64 output is pinned by the
// standard, but the std distributions are implementation-defined, so every
// draw that must reproduce across toolchains goes through these instead.

namespace dade::rng {

// 53-bit uniform in [0, 1).
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n) via rejection sampling.
inline std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t n) {
    const std::uint64_t limit = (0 - n) % n;  // 2^64 mod n
    std::uint64_t r = gen();
    while (r < limit) r = gen();
    return r % n;
}

// Standard normal deviates, Box-Muller. Two engine draws produce two
// deviates; the second is cached so the draw order stays fixed.
class Gaussian {
public:
    double operator()(std::mt19937_64& gen) {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01(gen);
        while (u1 <= 0.0) u1 = uniform01(gen);
        const double u2 = uniform01(gen);
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        spare_ = mag * std::sin(ang);
        has_spare_ = true;
        return mag * std::cos(ang);
    }

private:
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dade::rng
