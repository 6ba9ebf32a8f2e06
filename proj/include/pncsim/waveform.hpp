#pragma once

// Oversampled baseband waveforms: root-raised-cosine shaping, timing /
// carrier impairments, and the amplify-and-forward relay channel.
//
// Conventions:
//   * Time is counted in samples on a per-slot clock; Waveform::start is
//     the time of samples[0]. shape() places the peak of symbol k at
//     time k * oversampling.
//   * Pulse taps are scaled so that sum(tap^2) = oversampling (the
//     sampled unit-energy continuous pulse). Waveform energy is then
//     sum |x|^2 / oversampling, and a burst carries its symbol energy.
//   * White complex noise of spectral density N0 has per-sample variance
//     N0 * oversampling; after the matched filter the per-symbol noise
//     variance is exactly N0, so matched-filter SNR per symbol is Es/N0.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pncsim/constellation.hpp"
#include "pncsim/rng.hpp"

namespace pncsim {

struct ChannelParams {
    double es = 1.0;      // E_s, energy per (full-power) symbol
    double beta_u = 1.0;  // uplink path-loss amplitude
    double beta_d = 1.0;  // downlink path-loss amplitude
    double gain = 1.0;    // relay amplitude gain G
    double n0_u = 0.0;    // uplink noise spectral density
    double n0_d = 0.0;    // downlink noise spectral density

    void validate() const {
        if (es < 0 || beta_u < 0 || beta_d < 0 || gain < 0 || n0_u < 0 || n0_d < 0)
            throw std::invalid_argument("ChannelParams: all parameters must be nonnegative");
    }
    // End-to-end amplitude seen by a transmitted symbol.
    double through_gain() const { return beta_u * gain * beta_d; }
    // Noise variance at the matched-filter output (denominator of the
    // slot-SNR formula).
    double effective_noise() const { return n0_u * beta_d * beta_d * gain * gain + n0_d; }
};

struct ImpairmentParams {
    double delay = 0.0;  // in symbol periods, >= 0
    double cfo = 0.0;    // frequency offset as a fraction of the symbol rate
    double phase = 0.0;  // radians

    void validate() const {
        if (!(delay >= 0.0) || delay > 64.0)
            throw std::invalid_argument("ImpairmentParams: delay must be in [0, 64] symbols");
        if (!(std::fabs(cfo) < 0.5)) throw std::invalid_argument("ImpairmentParams: |cfo| must be < 0.5");
        if (!std::isfinite(phase)) throw std::invalid_argument("ImpairmentParams: non-finite phase");
    }
    bool is_identity() const { return delay == 0.0 && cfo == 0.0 && phase == 0.0; }
};

struct Waveform {
    std::vector<cplx> samples;
    int oversampling = 8;
    long start = 0;  // sample-clock time of samples[0]

    long end() const { return start + static_cast<long>(samples.size()); }
    // Energy in symbol-energy units.
    double energy() const {
        double s = 0.0;
        for (const auto& v : samples) s += std::norm(v);
        return s / oversampling;
    }
};

// Root raised cosine, unit continuous energy, t in symbol periods.
inline double rrc_value(double t, double rolloff) {
    const double a = rolloff;
    const double pi = std::numbers::pi;
    if (std::fabs(t) < 1e-12) return 1.0 - a + 4.0 * a / pi;
    const double fourat = 4.0 * a * t;
    const double den = 1.0 - fourat * fourat;
    if (std::fabs(den) < 1e-9) {
        const double x = pi / (4.0 * a);
        return (a / std::sqrt(2.0)) * ((1.0 + 2.0 / pi) * std::sin(x) + (1.0 - 2.0 / pi) * std::cos(x));
    }
    return (std::sin(pi * t * (1.0 - a)) + fourat * std::cos(pi * t * (1.0 + a))) / (pi * t * den);
}

struct RrcPulse {
    int oversampling = 8;
    double rolloff = 0.35;
    int span = 8;               // one-sided, in symbols
    std::vector<double> taps;   // length 2*span*oversampling + 1
    double scale = 1.0;         // applied on top of rrc_value for exact discrete energy

    int half_len() const { return span * oversampling; }

    // Tap vector shifted by a fractional offset mu in [0,1) samples,
    // for matched filtering at arbitrary symbol timing.
    std::vector<double> shifted_taps(double mu) const {
        std::vector<double> out(taps.size());
        for (size_t i = 0; i < out.size(); ++i) {
            const double t = (static_cast<double>(i) - half_len() - mu) / oversampling;
            out[i] = scale * rrc_value(t, rolloff);
        }
        return out;
    }
};

inline RrcPulse make_rrc(int oversampling, double rolloff, int span) {
    if (oversampling < 2) throw std::invalid_argument("make_rrc: oversampling must be >= 2");
    if (!(rolloff > 0.0) || rolloff > 1.0) throw std::invalid_argument("make_rrc: rolloff must be in (0, 1]");
    if (span < 1) throw std::invalid_argument("make_rrc: span must be >= 1");
    RrcPulse p;
    p.oversampling = oversampling;
    p.rolloff = rolloff;
    p.span = span;
    const int half = p.half_len();
    p.taps.resize(static_cast<size_t>(2 * half + 1));
    double energy = 0.0;
    for (int i = -half; i <= half; ++i) {
        const double v = rrc_value(static_cast<double>(i) / oversampling, rolloff);
        p.taps[static_cast<size_t>(i + half)] = v;
        energy += v * v;
    }
    // Make the discrete energy exactly `oversampling`.
    p.scale = std::sqrt(static_cast<double>(oversampling) / energy);
    for (auto& t : p.taps) t *= p.scale;
    return p;
}

// Pulse-shape a symbol sequence. Symbol k peaks at time k * oversampling;
// the returned waveform starts at -span * oversampling.
inline Waveform shape(std::span<const cplx> symbols, const RrcPulse& pulse) {
    Waveform w;
    w.oversampling = pulse.oversampling;
    w.start = -static_cast<long>(pulse.half_len());
    const size_t len = symbols.empty()
                           ? 0
                           : (symbols.size() - 1) * static_cast<size_t>(pulse.oversampling) + pulse.taps.size();
    w.samples.assign(len, cplx{0.0, 0.0});
    for (size_t k = 0; k < symbols.size(); ++k) {
        const cplx s = symbols[k];
        if (s == cplx{0.0, 0.0}) continue;
        double* dst = reinterpret_cast<double*>(w.samples.data() + k * static_cast<size_t>(pulse.oversampling));
        for (size_t i = 0; i < pulse.taps.size(); ++i) {
            dst[2 * i] += s.real() * pulse.taps[i];
            dst[2 * i + 1] += s.imag() * pulse.taps[i];
        }
    }
    return w;
}

namespace detail {

// Centered 8-point Lagrange coefficients for evaluating x(base - mu) from
// samples x(base + t), t in {-4..3}. At the oversampling ratios used here
// the signal occupies a small fraction of the Nyquist band, where this is
// accurate to well below -100 dB.
inline std::array<double, 8> lagrange8(double mu) {
    std::array<double, 8> coef;
    for (int ti = 0; ti < 8; ++ti) {
        const int t = ti - 4;
        double c = 1.0;
        for (int j = -4; j <= 3; ++j) {
            if (j == t) continue;
            c *= (-mu - j) / static_cast<double>(t - j);
        }
        coef[static_cast<size_t>(ti)] = c;
    }
    return coef;
}

}  // namespace detail

// Apply delay (band-limited interpolation), carrier frequency offset and
// phase. delay = 0, cfo = 0, phase = 0 returns the input unchanged.
inline Waveform impair(const Waveform& w, const ImpairmentParams& imp) {
    imp.validate();
    Waveform out;
    out.oversampling = w.oversampling;
    out.start = w.start;

    const double delay_samples = imp.delay * w.oversampling;
    const long shift = static_cast<long>(std::floor(delay_samples));
    const double mu = delay_samples - static_cast<double>(shift);

    if (mu < 1e-12 || mu > 1.0 - 1e-12) {
        // Integer delay: exact shift (keeps synchronized runs bit-exact).
        const long ishift = shift + (mu > 0.5 ? 1 : 0);
        out.samples.assign(w.samples.size() + static_cast<size_t>(ishift), cplx{0.0, 0.0});
        for (size_t i = 0; i < w.samples.size(); ++i) out.samples[i + static_cast<size_t>(ishift)] = w.samples[i];
    } else {
        const auto coef = detail::lagrange8(mu);
        const long in_len = static_cast<long>(w.samples.size());
        const long out_len = in_len + shift + 5;
        out.samples.assign(static_cast<size_t>(out_len), cplx{0.0, 0.0});
        for (long i = 0; i < out_len; ++i) {
            const long base = i - shift;  // output sample i holds x(base - mu)
            cplx acc{0.0, 0.0};
            for (int ti = 0; ti < 8; ++ti) {
                const long idx = base + ti - 4;
                if (idx < 0 || idx >= in_len) continue;
                acc += w.samples[static_cast<size_t>(idx)] * coef[static_cast<size_t>(ti)];
            }
            out.samples[static_cast<size_t>(i)] = acc;
        }
    }

    if (imp.cfo != 0.0 || imp.phase != 0.0) {
        for (size_t i = 0; i < out.samples.size(); ++i) {
            const double t_sym = static_cast<double>(out.start + static_cast<long>(i)) / out.oversampling;
            out.samples[i] *= std::polar(1.0, kTwoPi * imp.cfo * t_sym + imp.phase);
        }
    }
    return out;
}

inline Waveform scale_waveform(Waveform w, double factor) {
    for (auto& s : w.samples) s *= factor;
    return w;
}

// Uplink sum -> relay amplification -> downlink:
//   r = beta_d * G * (beta_u * sum(e_p) + n_u) + n_d
// with complex AWGN of per-sample variance N0 * oversampling on each leg.
inline Waveform relay_channel(std::span<const Waveform> uplinks, const ChannelParams& cp, Rng& rng) {
    cp.validate();
    if (uplinks.empty()) throw std::invalid_argument("relay_channel: no uplink waveforms");
    const int os = uplinks[0].oversampling;
    long start = uplinks[0].start;
    long end = uplinks[0].end();
    for (const auto& u : uplinks) {
        if (u.oversampling != os) throw std::invalid_argument("relay_channel: mismatched sample rates");
        start = std::min(start, u.start);
        end = std::max(end, u.end());
    }
    Waveform r;
    r.oversampling = os;
    r.start = start;
    r.samples.assign(static_cast<size_t>(end - start), cplx{0.0, 0.0});
    for (const auto& u : uplinks) {
        const size_t off = static_cast<size_t>(u.start - start);
        for (size_t i = 0; i < u.samples.size(); ++i) r.samples[off + i] += u.samples[i];
    }
    const double amp_ud = cp.beta_d * cp.gain;
    if (cp.n0_u > 0.0) {
        const double sigma = std::sqrt(cp.n0_u * os / 2.0);
        for (auto& s : r.samples) {
            double a, b;
            rng.normal_pair(a, b);
            s = amp_ud * (cp.beta_u * s + cplx{sigma * a, sigma * b});
        }
    } else if (amp_ud != 1.0 || cp.beta_u != 1.0) {
        for (auto& s : r.samples) s = amp_ud * (cp.beta_u * s);
    }
    if (cp.n0_d > 0.0) {
        const double sigma = std::sqrt(cp.n0_d * os / 2.0);
        for (auto& s : r.samples) {
            double a, b;
            rng.normal_pair(a, b);
            s += cplx{sigma * a, sigma * b};
        }
    }
    return r;
}

// Dump as interleaved little-endian float32 I/Q pairs (one pair per sample).
inline void write_iq(const std::string& path, const Waveform& w) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_iq: cannot write " + path);
    for (const auto& s : w.samples) {
        const float pair[2] = {static_cast<float>(s.real()), static_cast<float>(s.imag())};
        f.write(reinterpret_cast<const char*>(pair), sizeof pair);
    }
}

// Received SNR on a slot where bursts with fractions rho arrive:
//   SNR = sum(rho) * Es G^2 bu^2 bd^2 / (N0u bd^2 G^2 + N0d)
inline double snr_on_slot(std::span<const double> rhos, const ChannelParams& cp) {
    cp.validate();
    double sum = 0.0;
    for (double r : rhos) sum += r;
    const double num = cp.es * cp.gain * cp.gain * cp.beta_u * cp.beta_u * cp.beta_d * cp.beta_d;
    const double den = cp.effective_noise();
    if (den == 0.0) throw std::domain_error("snr_on_slot: zero noise denominator (infinite SNR)");
    return sum * num / den;
}

}  // namespace pncsim
