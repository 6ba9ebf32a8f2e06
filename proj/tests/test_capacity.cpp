#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pncsim/capacity.hpp"

using namespace pncsim;

namespace {

double db(double x) { return std::pow(10.0, x / 10.0); }

}  // namespace

TEST_CASE("gauss-hermite oracle: weights sum to sqrt(pi)") {
    const oracles::GaussHermite gh(64);
    double s = 0.0;
    for (double w : gh.weights) s += w;
    CHECK(s == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-12));
    // Second moment of the weight: integral x^2 e^{-x^2} = sqrt(pi)/2.
    double m2 = 0.0;
    for (size_t i = 0; i < gh.nodes.size(); ++i) m2 += gh.weights[i] * gh.nodes[i] * gh.nodes[i];
    CHECK(m2 == doctest::Approx(std::sqrt(std::numbers::pi) / 2.0).epsilon(1e-10));
}

TEST_CASE("gauss-hermite oracle: BPSK capacity limits") {
    CHECK(oracles::bpsk_capacity_gh(1.0, 1e-4) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(oracles::bpsk_capacity_gh(1e-4, 1.0) == doctest::Approx(0.0).epsilon(1e-3));
}

TEST_CASE("layer_capacity: QPSK high-SNR and zero-SNR limits") {
    const Constellation c = qpsk(1.0);
    const double high = layer_capacity(c, 1, db(-20.0), 100000, 1);
    CHECK(high == doctest::Approx(2.0).epsilon(0.005));
    const double low = layer_capacity(c, 1, 1e4, 100000, 2);
    CHECK(std::fabs(low) < 0.01);
}

TEST_CASE("layer_capacity: QPSK matches the quadrature oracle at 3 dB") {
    const Constellation c = qpsk(1.0);
    const double nv = 1.0 / db(3.0);
    const double mc = layer_capacity(c, 1, nv, 2000000, 3);
    const double gh = oracles::qpsk_capacity_gh(1.0, nv);
    CHECK(std::fabs(mc - gh) < 0.01);
}

TEST_CASE("factorized and general estimators agree sample-for-sample") {
    const Constellation c = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.0}}, 1.0);
    REQUIRE(c.iq_product);
    const int positions[2] = {1, 2};
    for (double nv : {0.05, 0.3, 2.0}) {
        const auto fast = mutual_info_bits(c, positions, nv, 20000, 99);
        const auto slow = detail::mi_bits_general(c, positions, nv, 20000, 99);
        CHECK(fast.value == doctest::Approx(slow.value).epsilon(1e-9));
    }
    // Rank-2 positions too.
    const int p2[2] = {3, 4};
    const auto f2 = mutual_info_bits(c, p2, 0.1, 20000, 7);
    const auto s2 = detail::mi_bits_general(c, p2, 0.1, 20000, 7);
    CHECK(f2.value == doctest::Approx(s2.value).epsilon(1e-9));
}

TEST_CASE("mutual information agrees with an independent reference estimator") {
    const Constellation c = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.0}}, 1.0);
    const int positions[2] = {1, 2};
    const double nv = 1.0 / db(5.0);
    const auto mine = mutual_info_bits(c, positions, nv, 400000, 11);
    const double ref = oracles::mi_bits_reference(c.points, c.labels, c.label_bits,
                                                  positions, nv, 400000, 12);
    // Two independent Monte Carlo runs; generous 3-sigma-ish band.
    CHECK(std::fabs(mine.value - ref) < 0.02);
    CHECK(mine.std_error < 0.005);
}

TEST_CASE("layer_capacity: validation") {
    const Constellation c = qpsk(1.0);
    CHECK_THROWS_AS(layer_capacity(c, 2, 0.1, 10000, 1), std::invalid_argument);
    CHECK_THROWS_AS(layer_capacity(c, 1, 0.1, 999, 1), std::invalid_argument);
    CHECK_THROWS_AS(layer_capacity(c, 1, 0.0, 10000, 1), std::invalid_argument);
}

TEST_CASE("achievable_rate: degenerate second layer reduces to QPSK/N_u") {
    PowerAllocation alloc{{1.0, 0.0}};
    ChannelParams cp;
    cp.n0_d = 1.0 / db(3.0);
    CapacityOptions opt;
    opt.final_samples = 400000;
    const RatePoint rp = achievable_rate(alloc, cp, SchemeParams{4, 2}, opt);
    const double qpsk_c = layer_capacity(qpsk(1.0), 1, 1.0 / db(3.0), 400000, 77);
    CHECK(rp.rate_per_user == doctest::Approx(qpsk_c / 4.0).epsilon(0.01));
    CHECK(rp.layer_capacities.size() == 2);
    CHECK(std::fabs(rp.layer_capacities[1]) < 0.01);  // zero-energy layer carries nothing
}

TEST_CASE("achievable_rate: N_b = 1 collapses to TDMA") {
    PowerAllocation alloc{{1.0}};
    ChannelParams cp;
    cp.n0_d = 1.0 / db(2.0);
    CapacityOptions opt;
    opt.final_samples = 400000;
    const RatePoint rp = achievable_rate(alloc, cp, SchemeParams{4, 1}, opt);
    const double qpsk_c = layer_capacity(qpsk(1.0), 1, 1.0 / db(2.0), 400000, 78);
    CHECK(rp.rate_per_user == doctest::Approx(qpsk_c / 4.0).epsilon(0.01));
}

TEST_CASE("achievable_rate: (1, 0.25) at 5 dB validated against the reference estimator") {
    PowerAllocation alloc{{1.0, 0.25}};
    ChannelParams cp;
    cp.n0_d = 1.0 / db(5.0);
    CapacityOptions opt;
    opt.final_samples = 1000000;
    const RatePoint rp = achievable_rate(alloc, cp, SchemeParams{4, 2}, opt);

    const double nv = 1.0 / db(5.0);
    const Constellation chi = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.0}}, 1.0);
    const int pos1[2] = {1, 2};
    const double c1 = oracles::mi_bits_reference(chi.points, chi.labels, chi.label_bits,
                                                 pos1, nv, 1000000, 21);
    const Constellation rest = qpsk(0.25);
    const int pos2[2] = {1, 2};
    const double c2 = oracles::mi_bits_reference(rest.points, rest.labels, rest.label_bits,
                                                 pos2, nv, 1000000, 22);
    CHECK(rp.layer_capacities[0] == doctest::Approx(c1).epsilon(0.015));
    CHECK(rp.layer_capacities[1] == doctest::Approx(c2).epsilon(0.015));
    CHECK(rp.rate_per_user == doctest::Approx((c1 + c2) / 4.0).epsilon(0.015));
}

TEST_CASE("recommended_code_rate: direct formula") {
    RatePoint rp;
    rp.layer_capacities = {0.8, 0.6};
    CHECK(recommended_code_rate(rp, SchemeParams{4, 2}) == doctest::Approx(0.35).epsilon(1e-12));
    rp.layer_capacities = {2.0, 2.0, 2.0};
    CHECK(recommended_code_rate(rp, SchemeParams{4, 3}) == doctest::Approx(1.0).epsilon(1e-12));
    rp.layer_capacities = {1.0};
    CHECK(recommended_code_rate(rp, SchemeParams{4, 1}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("optimize_allocation: N_b = 1 always picks full power") {
    CapacityOptions opt;
    opt.samples = 20000;
    opt.final_samples = 20000;
    for (double snr_db : {-3.0, 0.0, 6.0}) {
        const RatePoint rp = optimize_allocation(db(snr_db), SchemeParams{4, 1}, 0.1, opt);
        REQUIRE(rp.allocation.rhos.size() == 1);
        CHECK(rp.allocation.rhos[0] == doctest::Approx(1.0));
    }
}

TEST_CASE("optimize_allocation: winner dominates every coarse candidate") {
    CapacityOptions opt;
    opt.samples = 20000;
    opt.final_samples = 20000;
    const SchemeParams p{4, 2};
    const double snr = db(2.0);
    const RatePoint rp = optimize_allocation(snr, p, 0.25, opt);
    ChannelParams cp;
    cp.n0_d = 1.0 / snr;
    // The statistical tie-break may trade up to the 3-sigma Monte Carlo
    // band; at 20000 samples that is well under 0.01 bits.
    for (double r1 = 0.0; r1 <= 1.0; r1 += 0.25) {
        for (double r2 = 0.0; r2 <= r1; r2 += 0.25) {
            const RatePoint cand = achievable_rate(PowerAllocation{{r1, r2}}, cp, p, opt);
            CHECK(rp.search_rate >= cand.rate_per_user - 0.01);
        }
    }
}

TEST_CASE("optimize_allocation: full power is always at least as good at the top") {
    // rho = (1, 0) is feasible, so the optimized N_u * R_a can never fall
    // below QPSK capacity (up to Monte Carlo error).
    CapacityOptions opt;
    opt.samples = 50000;
    opt.final_samples = 200000;
    const SchemeParams p{4, 2};
    for (double snr_db : {0.0, 3.0}) {
        const RatePoint rp = optimize_allocation(db(snr_db), p, 0.1, opt);
        const double qpsk_c = layer_capacity(qpsk(1.0), 1, 1.0 / db(snr_db), 200000, 55);
        CHECK(4.0 * rp.rate_per_user >= qpsk_c - 0.01);
    }
}

TEST_CASE("layer_capacity: monotone non-increasing in noise (statistical)") {
    const Constellation c = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.4, 0.0}}, 1.0);
    const int positions[2] = {1, 2};
    double prev = 1e9;
    double prev_se = 0.0;
    int i = 0;
    for (double nv : {0.05, 0.15, 0.45, 1.3, 4.0}) {
        const auto e = mutual_info_bits(c, positions, nv, 150000, 300 + static_cast<uint64_t>(i++));
        CHECK(e.value <= prev + 3.0 * (e.std_error + prev_se));
        prev = e.value;
        prev_se = e.std_error;
    }
}

TEST_CASE("chain rule bound: layer capacities sum below 2 N_b") {
    const Constellation c =
        superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.5, 0.0}, LayerSpec{0.2, 0.0}}, 1.0);
    for (double nv : {0.03, 0.3, 3.0}) {
        double sum = 0.0;
        for (int rank = 1; rank <= 3; ++rank) {
            const double v = layer_capacity(c, rank, nv, 50000, 400 + static_cast<uint64_t>(rank));
            CHECK(v >= -0.01);
            CHECK(v <= 2.0 + 0.01);
            sum += v;
        }
        CHECK(sum <= 6.0 + 0.03);
    }
}

TEST_CASE("phase-averaged capacity stays close to co-phased at low SNR") {
    const std::vector<double> fractions = {1.0, 0.25};
    const double nv = 1.0;  // 0 dB-ish regime, phase sensitivity is mild
    const double co = layer_capacity(superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.0}}, 1.0),
                                     1, nv, 100000, 60);
    const double avg = layer_capacity_phase_averaged(fractions, 1.0, 1, nv, 20000, 61, 8);
    CHECK(std::fabs(co - avg) < 0.1);
}

TEST_CASE("optimize_allocation: 0 dB N_b=2 golden, two-resolution agreement") {
    // Golden values from this implementation's own high-resolution run
    // (grid 0.05, refinement 0.005, 2e6-sample re-evaluation), cross
    // checked here against an independent coarse brute force.
    CapacityOptions opt;
    opt.samples = 200000;
    opt.final_samples = 2000000;
    opt.threads = 2;
    const SchemeParams p{4, 2};
    const RatePoint rp = optimize_allocation(1.0, p, 0.05, opt);
    CHECK(rp.allocation.rhos[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rp.allocation.rhos[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(4.0 * rp.rate_per_user == doctest::Approx(1.5625).epsilon(0.01));
    CHECK(recommended_code_rate(rp, p) == doctest::Approx(0.3906).epsilon(0.01));

    // Coarse brute force over a 0.25 grid cannot beat the optimizer.
    CapacityOptions copt;
    copt.samples = 50000;
    copt.final_samples = 50000;
    ChannelParams cp;
    cp.n0_d = 1.0;
    double coarse_best = 0.0;
    for (double r1 = 0.0; r1 <= 1.0; r1 += 0.25)
        for (double r2 = 0.0; r2 <= r1; r2 += 0.25)
            coarse_best = std::max(
                coarse_best, achievable_rate(PowerAllocation{{r1, r2}}, cp, p, copt).rate_per_user);
    CHECK(rp.rate_per_user >= coarse_best - 0.01);
}

TEST_CASE("achievable_rate: phase-averaged sensitivity mode") {
    PowerAllocation alloc{{1.0, 0.25}};
    ChannelParams cp;
    cp.n0_d = 1.0;  // 0 dB
    CapacityOptions co_phased;
    co_phased.final_samples = 200000;
    CapacityOptions averaged = co_phased;
    averaged.phase_average = true;
    averaged.phase_draws = 8;
    const SchemeParams p{4, 2};
    const RatePoint a = achievable_rate(alloc, cp, p, co_phased);
    const RatePoint b = achievable_rate(alloc, cp, p, averaged);
    // The interference-free term is phase-invariant; the interfered term
    // moves a little. Both stay in sane ranges at this SNR.
    CHECK(b.layer_capacities[1] == doctest::Approx(a.layer_capacities[1]).epsilon(0.05));
    CHECK(std::fabs(b.layer_capacities[0] - a.layer_capacities[0]) < 0.25);
    CHECK(b.rate_per_user > 0.2);
    CHECK(b.rate_per_user < 0.6);
}
