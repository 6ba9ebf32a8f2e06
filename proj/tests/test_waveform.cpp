#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "pncsim/receiver.hpp"
#include "pncsim/rng.hpp"
#include "pncsim/waveform.hpp"

using namespace pncsim;

namespace {

std::vector<cplx> random_qpsk(size_t count, double energy, Rng& rng) {
    const double a = std::sqrt(energy / 2.0);
    std::vector<cplx> s(count);
    for (auto& v : s)
        v = cplx{rng.coin() ? a : -a, rng.coin() ? a : -a};
    return s;
}

}  // namespace

TEST_CASE("rrc pulse: discrete energy equals the oversampling factor") {
    for (int os : {4, 8}) {
        const RrcPulse p = make_rrc(os, 0.35, 8);
        double e = 0.0;
        for (double t : p.taps) e += t * t;
        CHECK(e == doctest::Approx(static_cast<double>(os)).epsilon(1e-12));
    }
}

TEST_CASE("make_rrc: parameter validation") {
    CHECK_THROWS_AS(make_rrc(1, 0.35, 8), std::invalid_argument);
    CHECK_THROWS_AS(make_rrc(8, 0.0, 8), std::invalid_argument);
    CHECK_THROWS_AS(make_rrc(8, 1.5, 8), std::invalid_argument);
}

TEST_CASE("shape: matched filter recovers a single unit symbol") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    const std::vector<cplx> sym = {cplx{1.0, 0.0}};
    const Waveform w = shape(sym, p);
    const auto y = matched_filter_sample(w, p, ImpairmentParams{}, 1);
    CHECK(std::abs(y[0] - cplx{1.0, 0.0}) < 1e-3);
}

TEST_CASE("shape: no inter-symbol interference at symbol instants") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    const std::vector<cplx> sym = {cplx{1.0, 0.0}, cplx{0.0, 0.0}};
    const Waveform w = shape(sym, p);
    const auto y = matched_filter_sample(w, p, ImpairmentParams{}, 2);
    CHECK(std::abs(y[0] - cplx{1.0, 0.0}) < 1e-3);
    CHECK(std::abs(y[1]) < 1e-3);  // Nyquist zero at the neighbor's instant
}

TEST_CASE("shape: waveform energy per symbol matches symbol energy within 1%") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    Rng rng(17);
    const double es = 0.8;
    const auto sym = random_qpsk(1000, es, rng);
    const Waveform w = shape(sym, p);
    CHECK(w.energy() / 1000.0 == doctest::Approx(es).epsilon(0.01));
}

TEST_CASE("impair: zero impairment is a bit-exact identity") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    Rng rng(3);
    const Waveform w = shape(random_qpsk(50, 1.0, rng), p);
    const Waveform out = impair(w, ImpairmentParams{});
    REQUIRE(out.samples.size() == w.samples.size());
    for (size_t i = 0; i < w.samples.size(); ++i) CHECK(out.samples[i] == w.samples[i]);
}

TEST_CASE("impair: phase pi negates the waveform") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    Rng rng(4);
    const Waveform w = shape(random_qpsk(20, 1.0, rng), p);
    const Waveform out = impair(w, ImpairmentParams{0.0, 0.0, std::numbers::pi});
    for (size_t i = 0; i < w.samples.size(); ++i)
        CHECK(std::abs(out.samples[i] + w.samples[i]) < 1e-12);
}

TEST_CASE("impair: half-symbol delay matches the raised-cosine oracle") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    const std::vector<cplx> sym = {cplx{1.0, 0.0}};
    const Waveform w = impair(shape(sym, p), ImpairmentParams{0.5, 0.0, 0.0});
    // Sampling at the un-delayed instant sees the pulse half a period off.
    const auto off = matched_filter_sample(w, p, ImpairmentParams{}, 1);
    CHECK(std::abs(off[0].real() - oracles::rc_value(0.5, 0.35)) < 1e-2);
    // Sampling at the true delay recovers the peak.
    const auto on = matched_filter_sample(w, p, ImpairmentParams{0.5, 0.0, 0.0}, 1);
    CHECK(std::abs(on[0] - cplx{1.0, 0.0}) < 1e-2);
}

TEST_CASE("impair: fractional delays are band-limited accurate") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    Rng rng(5);
    const auto sym = random_qpsk(64, 1.0, rng);
    const Waveform w = shape(sym, p);
    for (double d : {0.37, 1.93, 3.511}) {
        const Waveform out = impair(w, ImpairmentParams{d, 0.0, 0.0});
        const auto y = matched_filter_sample(out, p, ImpairmentParams{d, 0.0, 0.0},
                                             static_cast<int>(sym.size()));
        // Residual error is dominated by the +-8-symbol pulse truncation
        // (about -50 dB of self-ISI), not by the interpolation.
        double worst = 0.0;
        for (size_t k = 8; k + 8 < sym.size(); ++k)
            worst = std::max(worst, std::abs(y[k] - sym[k]));
        CHECK(worst < 8e-3);
    }
}

TEST_CASE("impair: validation errors") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    const Waveform w = shape(std::vector<cplx>{cplx{1.0, 0.0}}, p);
    CHECK_THROWS_AS(impair(w, ImpairmentParams{-0.1, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(impair(w, ImpairmentParams{100.0, 0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(impair(w, ImpairmentParams{0.0, 0.6, 0.0}), std::invalid_argument);
}

TEST_CASE("relay_channel: noiseless unit-gain identity is bit-exact") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    Rng rng(6);
    const Waveform w = shape(random_qpsk(30, 1.0, rng), p);
    Rng noise(1);
    std::vector<Waveform> ups = {w};
    const Waveform r = relay_channel(ups, ChannelParams{}, noise);
    REQUIRE(r.samples.size() == w.samples.size());
    for (size_t i = 0; i < w.samples.size(); ++i) CHECK(r.samples[i] == w.samples[i]);
}

TEST_CASE("relay_channel: noiseless sum of two uplinks") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    Rng rng(7);
    const Waveform a = shape(random_qpsk(30, 1.0, rng), p);
    const Waveform b = shape(random_qpsk(30, 0.5, rng), p);
    Rng noise(1);
    std::vector<Waveform> ups = {a, b};
    const Waveform r = relay_channel(ups, ChannelParams{}, noise);
    for (size_t i = 0; i < r.samples.size(); ++i) {
        const cplx ea = i < a.samples.size() ? a.samples[i] : cplx{};
        const cplx eb = i < b.samples.size() ? b.samples[i] : cplx{};
        CHECK(std::abs(r.samples[i] - (ea + eb)) < 1e-15);
    }
}

TEST_CASE("relay_channel: strict additivity in the noiseless configuration") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    Rng rng(8);
    const Waveform a = impair(shape(random_qpsk(25, 1.0, rng), p), ImpairmentParams{0.4, 0.01, 0.3});
    const Waveform b = impair(shape(random_qpsk(25, 0.25, rng), p), ImpairmentParams{1.2, -0.01, 1.7});
    ChannelParams cp;
    cp.beta_u = 0.8;
    cp.beta_d = 1.1;
    cp.gain = 2.5;
    Rng noise(1);
    std::vector<Waveform> both = {a, b};
    std::vector<Waveform> only_a = {a};
    std::vector<Waveform> only_b = {b};
    const Waveform rab = relay_channel(both, cp, noise);
    const Waveform ra = relay_channel(only_a, cp, noise);
    const Waveform rb = relay_channel(only_b, cp, noise);
    for (size_t i = 0; i < rab.samples.size(); ++i) {
        const cplx ea = i < ra.samples.size() ? ra.samples[i] : cplx{};
        const cplx eb = i < rb.samples.size() ? rb.samples[i] : cplx{};
        CHECK(std::abs(rab.samples[i] - (ea + eb)) < 1e-12);
    }
}

TEST_CASE("relay_channel: mismatched sample rates rejected") {
    const Waveform a = shape(std::vector<cplx>{cplx{1, 0}}, make_rrc(8, 0.35, 8));
    const Waveform b = shape(std::vector<cplx>{cplx{1, 0}}, make_rrc(4, 0.35, 8));
    Rng noise(1);
    std::vector<Waveform> ups = {a, b};
    CHECK_THROWS_AS(relay_channel(ups, ChannelParams{}, noise), std::invalid_argument);
}

TEST_CASE("snr_on_slot: worked example and limits") {
    ChannelParams cp;
    cp.es = 1.0;
    cp.beta_u = 1.0;
    cp.beta_d = 1.0;
    cp.gain = 2.0;
    cp.n0_u = 0.1;
    cp.n0_d = 0.2;
    const std::vector<double> rhos = {1.0, 0.25};
    // sum(rho) * Es G^2 / (N0u G^2 + N0d) = 1.25 * 4 / 0.6
    CHECK(snr_on_slot(rhos, cp) == doctest::Approx(1.25 * 4.0 / 0.6).epsilon(1e-12));

    // Large relay gain: uplink-limited limit sum(rho) Es / N0u.
    cp.gain = 1e6;
    CHECK(snr_on_slot(rhos, cp) == doctest::Approx(1.25 / 0.1).epsilon(1e-6));

    // Zero allocation -> zero SNR.
    const std::vector<double> zero = {0.0, 0.0};
    cp.gain = 2.0;
    CHECK(snr_on_slot(zero, cp) == 0.0);

    // Zero denominator -> explicit error.
    cp.n0_u = 0.0;
    cp.n0_d = 0.0;
    CHECK_THROWS_AS(snr_on_slot(rhos, cp), std::domain_error);
}

TEST_CASE("per-burst energy accounting within 1%") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    Rng rng(9);
    for (double rho : {1.0, 0.5, 0.2}) {
        const double es = 1.3;
        const auto sym = random_qpsk(600, rho * es, rng);
        const Waveform w = shape(sym, p);
        CHECK(w.energy() / 600.0 == doctest::Approx(rho * es).epsilon(0.01));
    }
}

TEST_CASE("relay chain SNR matches the closed form within 0.15 dB") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    Rng param_rng(1234);
    for (int set = 0; set < 20; ++set) {
        ChannelParams cp;
        cp.es = 0.5 + param_rng.uniform();
        cp.beta_u = 0.5 + param_rng.uniform();
        cp.beta_d = 0.5 + param_rng.uniform();
        cp.gain = 0.5 + 2.0 * param_rng.uniform();
        cp.n0_u = 0.02 + 0.2 * param_rng.uniform();
        cp.n0_d = 0.02 + 0.2 * param_rng.uniform();
        const int nb = 1 + static_cast<int>(param_rng.bounded(3));
        std::vector<double> rhos(static_cast<size_t>(nb));
        double prev = 1.0;
        for (auto& r : rhos) {
            r = prev * (0.3 + 0.7 * param_rng.uniform());
            prev = r;
        }

        const size_t symbols = 20000;
        Rng data_rng(derive_seed(99, static_cast<uint64_t>(set)));
        std::vector<Waveform> ups;
        for (double rho : rhos) ups.push_back(shape(random_qpsk(symbols, rho * cp.es, data_rng), p));

        // Signal power from the noiseless pass, noise from the difference.
        ChannelParams clean = cp;
        clean.n0_u = 0.0;
        clean.n0_d = 0.0;
        Rng nrng(derive_seed(100, static_cast<uint64_t>(set)));
        const Waveform r_clean = relay_channel(ups, clean, nrng);
        const Waveform r_noisy = relay_channel(ups, cp, nrng);
        const auto y_clean = matched_filter_sample(r_clean, p, ImpairmentParams{}, symbols);
        const auto y_noisy = matched_filter_sample(r_noisy, p, ImpairmentParams{}, symbols);
        double sig = 0.0, noi = 0.0;
        for (size_t k = 0; k < symbols; ++k) {
            sig += std::norm(y_clean[k]);
            noi += std::norm(y_noisy[k] - y_clean[k]);
        }
        const double snr_est = sig / noi;
        const double snr_formula = snr_on_slot(rhos, cp);
        const double diff_db = 10.0 * std::log10(snr_est / snr_formula);
        CHECK(std::fabs(diff_db) < 0.15);
    }
}

TEST_CASE("write_iq emits interleaved float32 pairs") {
    Waveform w;
    w.samples = {cplx{1.0, -2.0}, cplx{0.5, 0.25}};
    const std::string path = "/tmp/pncsim_test.iq";
    write_iq(path, w);
    std::ifstream f(path, std::ios::binary);
    float vals[4];
    f.read(reinterpret_cast<char*>(vals), sizeof vals);
    CHECK(vals[0] == 1.0f);
    CHECK(vals[1] == -2.0f);
    CHECK(vals[2] == 0.5f);
    CHECK(vals[3] == 0.25f);
}

TEST_CASE("matched filter: sampling outside the waveform support rejected") {
    const RrcPulse p = make_rrc(8, 0.35, 8);
    const Waveform w = shape(std::vector<cplx>{cplx{1.0, 0.0}}, p);
    // Asking for many symbols runs far past the single-symbol waveform.
    CHECK_THROWS_AS(matched_filter_sample(w, p, ImpairmentParams{}, 64), std::invalid_argument);
}
