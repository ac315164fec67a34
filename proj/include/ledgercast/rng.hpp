#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ledgercast {

// Pinned pseudo-random source: xoshiro256++ seeded through splitmix64.
// Every stochastic component in the project draws from this generator so
// that a (config, seed) pair reproduces identical output streams.
// std:: distribution objects are not used anywhere; their sequences are
// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // splitmix64 expansion of the 64-bit seed into xoshiro state
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            s = z ^ (z >> 31);
        }
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

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // multiply-shift; bias is negligible for the n used here (< 2^32)
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller. Pairs are generated eagerly and the
    // spare is cached, keeping the stream position deterministic.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * kPi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    // Knuth's product method; adequate for the small rates used in
    // invoice generation.
    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    // Fork a stream for an independent purpose without disturbing the
    // parent sequence.
    Rng fork(std::uint64_t stream_tag) {
        return Rng(next_u64() ^ (stream_tag * 0x9e3779b97f4a7c15ULL));
    }

private:
    static constexpr double kPi = 3.141592653589793238462643383279502884;
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Halton low-discrepancy sequence over [0,1)^dim, used to seed the tuner's
// initial design. Index 0 maps to the centre point so the documented
// default configuration is always evaluated first.
class Halton {
public:
    explicit Halton(std::size_t dim) : dim_(dim) {}

    std::vector<double> next() {
        std::vector<double> point(dim_);
        if (index_ == 0) {
            for (auto& v : point) v = 0.5;
        } else {
            for (std::size_t d = 0; d < dim_; ++d) {
                point[d] = radical_inverse(index_, prime(d));
            }
        }
        ++index_;
        return point;
    }

private:
    static int prime(std::size_t i) {
        static constexpr int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                         41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
        return primes[i % (sizeof(primes) / sizeof(primes[0]))];
    }

    static double radical_inverse(std::uint64_t n, int base) {
        double inv_base = 1.0 / base;
        double f = inv_base;
        double value = 0.0;
        while (n > 0) {
            value += f * static_cast<double>(n % static_cast<std::uint64_t>(base));
            n /= static_cast<std::uint64_t>(base);
            f *= inv_base;
        }
        return value;
    }

    std::size_t dim_;
    std::uint64_t index_ = 0;
};

} // namespace ledgercast
