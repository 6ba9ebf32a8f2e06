#pragma once

// Branch-free exp used in the Monte Carlo and demapping inner loops.
// Pure arithmetic (range reduction + degree-9 Taylor + exponent bit
// assembly): relative error below 1e-11 over the useful range, free of
// libm calls so the compiler can vectorize the surrounding loops.

#include <bit>
#include <cmath>
#include <cstdint>

namespace pncsim {

inline double fast_exp(double x) {
    x = x < -708.0 ? -708.0 : (x > 708.0 ? 708.0 : x);
    const double t = x * 1.4426950408889634073599246810019;  // x / ln 2
    const double n = std::floor(t + 0.5);
    const double z = (t - n) * 0.69314718055994530941723212145818;
    double p = 1.0 / 362880.0;
    p = p * z + 1.0 / 40320.0;
    p = p * z + 1.0 / 5040.0;
    p = p * z + 1.0 / 720.0;
    p = p * z + 1.0 / 120.0;
    p = p * z + 1.0 / 24.0;
    p = p * z + 1.0 / 6.0;
    p = p * z + 0.5;
    p = p * z + 1.0;
    p = p * z + 1.0;
    // 2^n assembled directly in the exponent field; n is in [-1022, 1023].
    const uint64_t bits = static_cast<uint64_t>(static_cast<int64_t>(n) + 1023) << 52;
    return p * std::bit_cast<double>(bits);
}

}  // namespace pncsim
