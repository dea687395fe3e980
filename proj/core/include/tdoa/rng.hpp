// Deterministic random number generation for simulation campaigns.
//
// The generator is pinned to xoshiro256++ (Blackman & Vigna), seeded through
// the splitmix64 finalizer. Both algorithms are public, stable, and pass the
// usual statistical batteries (PractRand, BigCrush), so a (seed, stream)
// pair identifies one bit-exact sequence in every build of this library.
// Gaussian variates use the Box-Muller transform with a fixed two-uniform
// consumption per pair, keeping stream layout independent of the values
// drawn.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace tdoa {

/// splitmix64 finalizer; also used to hash seed components together.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a child seed from a parent seed and up to three stream indices.
/// Used to give every (position, run, Z) trial its own independent stream.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) noexcept {
    std::uint64_t s = mix64(parent);
    s = mix64(s ^ (a + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2)));
    s = mix64(s ^ (b + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2)));
    s = mix64(s ^ (c + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2)));
    return s;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t s = seed;
        for (auto& word : state_) {
            s = mix64(s);
            word = s;
        }
        // A zero state is a fixed point of xoshiro; mix64 of anything is
        // never all-zero across four words in practice, but guard anyway.
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t next_u64() noexcept {
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

    /// Uniform double in [0, 1), 53 random bits.
    double uniform() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [a, b).
    double uniform(double a, double b) noexcept { return a + (b - a) * uniform(); }

    /// Uniform integer in [0, bound), bound >= 1. Rejection-free modulo with
    /// negligible bias for the bounds used here (bound << 2^64).
    std::uint64_t uniform_index(std::uint64_t bound) noexcept {
        return next_u64() % bound;
    }

    /// Standard normal variate; consumes exactly two uniforms per pair.
    double normal() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0,1] so the log is finite.
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace tdoa
