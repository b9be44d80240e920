#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>

#include "qkdnet/errors.hpp"

namespace qkdnet {

// splitmix64 step; also used to derive independent substream seeds so that
// (seed, salt, index) -> state is a pure function independent of call order.
constexpr std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt, std::uint64_t index) {
    std::uint64_t x = seed;
    std::uint64_t a = splitmix64(x);
    x ^= salt * 0x9e3779b97f4a7c15ULL;
    std::uint64_t b = splitmix64(x);
    x ^= index + 0x2545f4914f6cdd1dULL;
    std::uint64_t c = splitmix64(x);
    return a ^ (b + (c << 1));
}

// xoshiro256** 1.0. Hand-rolled so that streams are bit-identical across
// platforms and standard library versions.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, bound) via Lemire's method.
    std::uint64_t below(std::uint64_t bound) {
        if (bound == 0) throw domain_error("Xoshiro256::below: bound must be positive");
        std::uint64_t x = next();
        unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = (0ULL - bound) % bound;
            while (lo < threshold) {
                x = next();
                m = static_cast<unsigned __int128>(x) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller. A fresh pair is drawn on every call so the
    // consumed stream length does not depend on call history.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Exact Poisson sample. Knuth multiplication for small means, Hörmann's
    // PTRS transformed rejection for large means. Both are exact samplers.
    std::uint64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw domain_error("Xoshiro256::poisson: mean must be >= 0");
        if (mean == 0.0) return 0;
        if (mean < 10.0) return poisson_knuth(mean);
        return poisson_ptrs(mean);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t poisson_knuth(double mean) {
        const double enlam = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = 1.0;
        for (;;) {
            prod *= uniform();
            if (prod <= enlam) return k;
            ++k;
        }
    }

    std::uint64_t poisson_ptrs(double mean) {
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform();
            const double us = 0.5 - std::fabs(u);
            const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
                -mean + k * loglam - std::lgamma(k + 1.0)) {
                return static_cast<std::uint64_t>(k);
            }
        }
    }

    std::array<std::uint64_t, 4> s_{};
};

}  // namespace qkdnet
