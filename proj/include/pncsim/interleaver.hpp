#pragma once

// Seeded pseudo-random bit interleaver. The permutation is produced by a
// Fisher-Yates shuffle driven by xoshiro256** (see rng.hpp), so it is
// fully determined by (length, seed) and identical on every platform.
//
// interleave:   out[i] = in[perm[i]]   (transmit side)
// deinterleave: out[perm[i]] = in[i]   (receive side, exact inverse)

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "pncsim/rng.hpp"

namespace pncsim {

class Interleaver {
  public:
    Interleaver(size_t length, uint64_t seed) : seed_(seed), perm_(length) {
        for (size_t i = 0; i < length; ++i) perm_[i] = static_cast<uint32_t>(i);
        Rng rng(derive_seed(seed, 0x17EAul, length));
        for (size_t i = length; i > 1; --i) {
            const size_t j = static_cast<size_t>(rng.bounded(i));
            std::swap(perm_[i - 1], perm_[j]);
        }
    }

    size_t length() const { return perm_.size(); }
    uint64_t seed() const { return seed_; }
    const std::vector<uint32_t>& permutation() const { return perm_; }

    template <class T>
    std::vector<T> interleave(std::span<const T> v) const {
        if (v.size() != perm_.size()) throw std::invalid_argument("interleave: length mismatch");
        std::vector<T> out(v.size());
        for (size_t i = 0; i < v.size(); ++i) out[i] = v[perm_[i]];
        return out;
    }

    template <class T>
    std::vector<T> deinterleave(std::span<const T> v) const {
        if (v.size() != perm_.size()) throw std::invalid_argument("deinterleave: length mismatch");
        std::vector<T> out(v.size());
        for (size_t i = 0; i < v.size(); ++i) out[perm_[i]] = v[i];
        return out;
    }

  private:
    uint64_t seed_;
    std::vector<uint32_t> perm_;
};

}  // namespace pncsim
