#pragma once

// Deterministic random number generation for the whole simulator.
//
// Generator: xoshiro256** (Blackman/Vigna), state expanded from a 64-bit
// seed with the splitmix64 finalizer. Independent streams for parallel
// workers are derived with derive_seed(), so results never depend on
// thread scheduling.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

namespace pncsim {

// splitmix64 finalizer (Stafford mix13).
constexpr uint64_t mix64(uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

// One splitmix64 step: advances the state and returns the next word.
constexpr uint64_t splitmix_next(uint64_t& state) noexcept {
    state += 0x9E3779B97F4A7C15ull;
    return mix64(state);
}

// Stream derivation: seed -> substream identified by up to two tags.
// derive_seed(s, a) != derive_seed(s, b) for a != b with overwhelming
// probability; the construction is pure so any worker can recompute it.
constexpr uint64_t derive_seed(uint64_t master, uint64_t tag_a, uint64_t tag_b = 0) noexcept {
    uint64_t s = mix64(master ^ (0x9E3779B97F4A7C15ull * (tag_a + 1)));
    return mix64(s ^ (0xBF58476D1CE4E5B9ull * (tag_b + 1)));
}

class Rng {
  public:
    explicit Rng(uint64_t seed) noexcept {
        uint64_t s = seed;
        for (auto& w : state_) w = splitmix_next(s);
    }

    uint64_t next() noexcept {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double uniform_pos() noexcept { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

    // Unbiased-enough bounded draw (Lemire multiply-shift); deterministic
    // across platforms, unlike std::uniform_int_distribution.
    uint64_t bounded(uint64_t n) noexcept {
        return static_cast<uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    bool coin() noexcept { return (next() >> 63) != 0; }

    // Standard normal, Box-Muller with one cached value.
    double normal() noexcept {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double t = 6.283185307179586476925286766559 * uniform();
        cached_ = r * std::sin(t);
        have_cached_ = true;
        return r * std::cos(t);
    }

    // A pair of independent standard normals (one Box-Muller transform).
    void normal_pair(double& a, double& b) noexcept {
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double t = 6.283185307179586476925286766559 * uniform();
        a = r * std::cos(t);
        b = r * std::sin(t);
    }

  private:
    static constexpr uint64_t rotl(uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::array<uint64_t, 4> state_{};
    bool have_cached_ = false;
    double cached_ = 0.0;
};

// FNV-1a, used for config/report/matrix identity hashes.
constexpr uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xCBF29CE484222325ull) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

inline uint64_t fnv1a_str(const std::string& s, uint64_t h = 0xCBF29CE484222325ull) noexcept {
    return fnv1a(s.data(), s.size(), h);
}

}  // namespace pncsim
