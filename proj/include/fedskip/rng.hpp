#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <vector>

// Deterministic random streams. The std:: distributions are
// implementation-defined, so every transform lives here: identical seeds
// give identical byte-level results on any platform.

namespace fedskip {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Folds an ordered list of values into one seed. Used to derive independent
// streams per (seed, client, round, purpose) without sharing state.
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
    uint64_t state = 0x8f1bbcdcbfa53e0bULL;
    uint64_t h = splitmix64(state);
    for (uint64_t p : parts) {
        state ^= p;
        h ^= splitmix64(state);
        h *= 0x2545f4914f6cdd1dULL;
    }
    return h;
}

// xoshiro256++
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1) with 53-bit resolution
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // unbiased integer in [0, n)
    uint64_t below(uint64_t n) {
        uint64_t threshold = (-n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return next_double() < p; }

    double normal() {
        // Box-Muller, cosine branch only; consumes two uniforms per draw.
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Marsaglia-Tsang; alpha < 1 handled via the Gamma(alpha+1) boost.
    double gamma(double alpha) {
        if (alpha < 1.0) {
            double u = next_double();
            while (u <= 0.0) u = next_double();
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = next_double();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::vector<double> dirichlet(double alpha, size_t n) {
        std::vector<double> draws(n);
        double total = 0.0;
        for (auto& g : draws) {
            g = gamma(alpha);
            total += g;
        }
        if (total <= 0.0) {
            // all-underflow corner: fall back to uniform proportions
            for (auto& g : draws) g = 1.0 / static_cast<double>(n);
            return draws;
        }
        for (auto& g : draws) g /= total;
        return draws;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

}  // namespace fedskip
