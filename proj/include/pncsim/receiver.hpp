#pragma once

// Receiver chain: self-interference cancellation, matched filtering at
// the wanted user's timing, exact-sum soft demapping of one layer of a
// superposed constellation, and codeword reassembly.
//
// LLR sign convention: positive = bit 0 (matches the decoder).

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "pncsim/constellation.hpp"
#include "pncsim/fastmath.hpp"
#include "pncsim/interleaver.hpp"
#include "pncsim/waveform.hpp"

namespace pncsim {

struct LlrFrame {
    std::vector<double> values;
    long slot = 0;
};

// Subtract the receiver's own channel-distorted replica. The replica must
// lie inside the received extent and share its sample clock.
inline Waveform cancel_self(const Waveform& received, const Waveform& replica) {
    if (received.oversampling != replica.oversampling)
        throw std::invalid_argument("cancel_self: mismatched sample rates");
    if (replica.start < received.start || replica.end() > received.end())
        throw std::invalid_argument("cancel_self: replica extent outside received waveform");
    Waveform out = received;
    const size_t off = static_cast<size_t>(replica.start - received.start);
    for (size_t i = 0; i < replica.samples.size(); ++i) out.samples[off + i] -= replica.samples[i];
    return out;
}

// Matched filter and symbol-rate sampling at the wanted transmitter's
// known timing; the wanted user's CFO/phase are de-rotated at the
// sampling instants.
inline std::vector<cplx> matched_filter_sample(const Waveform& w, const RrcPulse& pulse,
                                               const ImpairmentParams& wanted, int num_symbols) {
    if (w.oversampling != pulse.oversampling)
        throw std::invalid_argument("matched_filter_sample: pulse/waveform oversampling mismatch");
    const double delay_samples = wanted.delay * pulse.oversampling;
    const long shift = static_cast<long>(std::floor(delay_samples));
    const double mu = delay_samples - static_cast<double>(shift);
    const std::vector<double> taps = (mu < 1e-12) ? pulse.taps : pulse.shifted_taps(mu);
    const int half = pulse.half_len();

    std::vector<cplx> out(static_cast<size_t>(num_symbols));
    for (int k = 0; k < num_symbols; ++k) {
        // Integer-grid correlation around the (fractional) symbol instant.
        const long center = static_cast<long>(k) * pulse.oversampling + shift;
        const long lo = center - half;
        if (center + half < w.start || center - half >= w.end())
            throw std::invalid_argument("matched_filter_sample: timing outside waveform support");
        cplx acc{0.0, 0.0};
        for (int t = 0; t < static_cast<int>(taps.size()); ++t) {
            const long idx = lo + t - w.start;
            if (idx < 0 || idx >= static_cast<long>(w.samples.size())) continue;
            acc += w.samples[static_cast<size_t>(idx)] * taps[static_cast<size_t>(t)];
        }
        acc /= static_cast<double>(pulse.oversampling);
        if (wanted.cfo != 0.0 || wanted.phase != 0.0) {
            const double t_sym = (static_cast<double>(k) * pulse.oversampling + delay_samples) / pulse.oversampling;
            acc *= std::polar(1.0, -(kTwoPi * wanted.cfo * t_sym + wanted.phase));
        }
        out[static_cast<size_t>(k)] = acc;
    }
    return out;
}

// LLR magnitude cap. Keeps mismodeled symbols (residual interference)
// from feeding the decoder confidently wrong values.
inline constexpr double kLlrClamp = 50.0;

// Exact-sum (log-MAP) bit LLRs over a labeled constellation, for a set of
// 1-based label positions. max_log selects the max-log approximation.
// Outputs are clamped to +-kLlrClamp.
inline std::vector<double> bit_llrs(std::span<const cplx> symbols, const Constellation& c,
                                    std::span<const int> positions, double noise_var,
                                    bool max_log = false) {
    if (!(noise_var > 0.0)) throw std::invalid_argument("bit_llrs: noise variance must be positive");
    for (int p : positions)
        if (p < 1 || p > c.label_bits) throw std::invalid_argument("bit_llrs: label position out of range");
    const size_t m = c.points.size();
    const size_t np = positions.size();
    std::vector<double> out(symbols.size() * np);
    std::vector<double> metric(m);
    constexpr double kNegInf = -1e300;

    for (size_t s = 0; s < symbols.size(); ++s) {
        const cplx y = symbols[s];
        double best = kNegInf;
        for (size_t j = 0; j < m; ++j) {
            metric[j] = -std::norm(y - c.points[j]) / noise_var;
            best = std::max(best, metric[j]);
        }
        for (size_t pi = 0; pi < np; ++pi) {
            const int pos = positions[pi];
            double num, den;  // bit 0 / bit 1 accumulators
            if (max_log) {
                num = kNegInf;
                den = kNegInf;
                for (size_t j = 0; j < m; ++j) {
                    if (c.bit_at(j, pos) == 0) num = std::max(num, metric[j]);
                    else den = std::max(den, metric[j]);
                }
            } else {
                double s0 = 0.0, s1 = 0.0;
                for (size_t j = 0; j < m; ++j) {
                    const double e = fast_exp(metric[j] - best);
                    if (c.bit_at(j, pos) == 0) s0 += e;
                    else s1 += e;
                }
                // Floor keeps LLRs finite when one class underflows.
                num = std::log(std::max(s0, 1e-300));
                den = std::log(std::max(s1, 1e-300));
            }
            const double llr = num - den;
            out[s * np + pi] = llr > kLlrClamp ? kLlrClamp : (llr < -kLlrClamp ? -kLlrClamp : llr);
        }
    }
    return out;
}

// LLRs for both bit positions of the rank-th layer (positions 2r-1, 2r).
inline LlrFrame demap_layer_llrs_rank(std::span<const cplx> symbols, const Constellation& c,
                                      int rank, double noise_var, bool max_log = false) {
    if (rank < 1 || rank > c.num_layers())
        throw std::invalid_argument("demap_layer_llrs: layer rank out of range");
    const int positions[2] = {2 * rank - 1, 2 * rank};
    LlrFrame f;
    f.values = bit_llrs(symbols, c, positions, noise_var, max_log);
    return f;
}

// Target layer selected by its energy (first matching rank when layers
// tie). Energy must match one of the constellation's layer energies.
inline LlrFrame demap_layer_llrs(std::span<const cplx> symbols, const Constellation& c,
                                 double target_energy, double noise_var, bool max_log = false) {
    const auto energies = c.layer_energies();
    const double tol = 1e-9 * std::max(1.0, std::fabs(target_energy));
    for (size_t l = 0; l < energies.size(); ++l) {
        if (std::fabs(energies[l] - target_energy) <= tol)
            return demap_layer_llrs_rank(symbols, c, static_cast<int>(l) + 1, noise_var, max_log);
    }
    throw std::invalid_argument("demap_layer_llrs: target energy not present in constellation");
}

// Concatenate per-slot frames in burst order, then undo the transmit
// interleaving.
inline LlrFrame assemble_codeword(const std::vector<LlrFrame>& slots, const Interleaver& ilv) {
    if (slots.empty()) throw std::invalid_argument("assemble_codeword: no slots");
    const size_t per = slots.front().values.size();
    std::vector<double> cat;
    cat.reserve(per * slots.size());
    for (const auto& f : slots) {
        if (f.values.size() != per) throw std::invalid_argument("assemble_codeword: mismatched slot lengths");
        cat.insert(cat.end(), f.values.begin(), f.values.end());
    }
    LlrFrame out;
    out.values = ilv.deinterleave(std::span<const double>(cat));
    return out;
}

}  // namespace pncsim
