#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace antago {

// Deterministic random stream. Standard-library distributions are
// implementation defined, so noise draws go through this instead; identical
// (seed, stream) pairs produce identical sequences on every platform.
class RandomStream {
public:
    // Substreams of one episode seed stay decorrelated via splitmix64 mixing.
    explicit RandomStream(std::uint64_t seed, std::uint64_t stream = 0) {
        std::uint64_t x = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
        for (int i = 0; i < 4; ++i) state_[i] = splitmix64(x);
    }

    std::uint64_t next_u64() {
        // xoshiro256++
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

    // Uniform in (0, 1); never returns 0 so it is safe inside log().
    double next_uniform() {
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    // Box-Muller without spare caching; two uniforms per draw keeps the
    // consumption pattern independent of call history.
    double next_gaussian(double sigma = 1.0) {
        const double u1 = next_uniform();
        const double u2 = next_uniform();
        return sigma * std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace antago
