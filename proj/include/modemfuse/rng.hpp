#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>

namespace modemfuse {

// Deterministic random streams for reproducible Monte Carlo runs.
//
// A stream is identified by a 64-bit key derived from a master seed and a
// path of integers (cell parameters, trial index, purpose tag). Identical
// keys produce identical draws on every run regardless of thread schedule;
// forking a child stream depends only on the parent key, never on how many
// values the parent has produced. xoshiro256++ core, splitmix64 expansion.
class RngStream {
  public:
    explicit RngStream(std::uint64_t key) : key_(key) {
        std::uint64_t x = key;
        for (auto& word : state_) word = splitmix64(x);
    }

    static RngStream derive(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
        std::uint64_t key = master;
        std::uint64_t x = master;
        (void)splitmix64(x);
        for (std::uint64_t component : path) {
            key ^= component + 0x9e3779b97f4a7c15ULL + (key << 6) + (key >> 2);
            x = key;
            key = splitmix64(x);
        }
        return RngStream(key);
    }

    RngStream fork(std::uint64_t tag) const { return derive(key_, {tag}); }

    std::uint64_t key() const { return key_; }

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

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a logarithm argument.
    double uniform_open() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller.
    double gaussian() {
        const double radius = std::sqrt(-2.0 * std::log(uniform_open()));
        return radius * std::cos(2.0 * 3.141592653589793238462643383279502884 * uniform());
    }

    // Circularly symmetric complex Gaussian with E|w|^2 = total_variance,
    // i.e. variance total_variance/2 per real component.
    std::complex<double> complex_gaussian(double total_variance) {
        const double radius = std::sqrt(-total_variance * std::log(uniform_open()));
        const double angle = 2.0 * 3.141592653589793238462643383279502884 * uniform();
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    // Rayleigh with scale sigma: E{x^2} = 2 sigma^2.
    double rayleigh(double sigma) { return sigma * std::sqrt(-2.0 * std::log(uniform_open())); }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t state_[4];
};

}  // namespace modemfuse
