#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "cct/errors.hpp"

namespace cct {

// Deterministic, platform-independent random stream.
//
// Core generator is xoshiro256++ seeded through splitmix64; all
// distributions are derived from raw 64-bit draws with fixed arithmetic,
// so a given (seed, draw sequence) produces identical values everywhere.
class RngStream {
public:
    static constexpr const char* kAlgorithm = "xoshiro256++/splitmix64";

    explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& s : state_) s = splitmix64(sm);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t draw_count() const { return draws_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        ++draws_;
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, bound) by rejection.
    std::uint64_t uniform_below(std::uint64_t bound) {
        if (bound == 0) throw UsageError("uniform_below: bound must be positive");
        const std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    // Standard normal via Box-Muller; consumes two draws, spare discarded.
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Normal(0, stddev) with rejection outside +/- clip_sigmas.
    double truncated_normal(double stddev, double clip_sigmas = 2.0) {
        for (;;) {
            double z = normal();
            if (std::abs(z) <= clip_sigmas) return z * stddev;
        }
    }

    // Independent child stream; children with distinct indices never share
    // state with each other or the parent.
    RngStream split(std::uint64_t child_index) const {
        std::uint64_t x = seed_ ^ (0x9E3779B97F4A7C15ULL * (child_index + 1));
        return RngStream(splitmix64(x));
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t splitmix64(std::uint64_t&& x) {
        std::uint64_t v = x;
        return splitmix64(v);
    }

    std::uint64_t state_[4];
    std::uint64_t seed_ = 0;
    std::uint64_t draws_ = 0;
};

}  // namespace cct
