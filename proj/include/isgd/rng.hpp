#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace isgd {

/// splitmix64 output function; also used as the substream hash.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/**
 * Seeded PRNG: xoshiro256++ core, state expanded from the seed with
 * splitmix64. All distributions are derived from the raw stream with
 * fixed, rejection-free algorithms (Box-Muller normals, inversion
 * exponentials, Knuth Poisson), so a given seed reproduces the exact
 * same observation sequence on any platform.
 *
 * Replication substreams: replication r draws from
 * Rng::substream(seed, r), which re-seeds with seed ^ hash(r+1).
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_) w = splitmix64_next(sm);
    }

    static Rng substream(std::uint64_t seed, std::uint64_t replication) {
        std::uint64_t h = replication + 1;
        return Rng(seed ^ splitmix64_next(h));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Uniform index in {0, ..., n-1}, unbiased (rejection on the modulo tail).
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return r % n;
    }

    /// Standard normal via Box-Muller (pairs cached).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Exponential with the given rate (mean 1/rate).
    double exponential(double rate) {
        double u = uniform01();
        if (u < 1e-300) u = 1e-300;
        return -std::log(u) / rate;
    }

    /// Poisson via Knuth's product method; large means are split into
    /// chunks so exp(-mean) never underflows.
    long poisson(double mean) {
        if (!(mean >= 0)) throw std::invalid_argument("poisson: mean must be >= 0");
        long total = 0;
        while (mean > 30.0) {
            total += poisson_knuth(30.0);
            mean -= 30.0;
        }
        return total + poisson_knuth(mean);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    long poisson_knuth(double mean) {
        const double threshold = std::exp(-mean);
        long k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > threshold);
        return k - 1;
    }

    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace isgd
