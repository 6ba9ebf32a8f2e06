#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "pncsim/constellation.hpp"
#include "pncsim/rng.hpp"

using namespace pncsim;

namespace {

// Brute-force minimum pairwise distance.
double min_pair_distance(const Constellation& c) {
    double best = 1e300;
    for (size_t i = 0; i < c.points.size(); ++i)
        for (size_t j = i + 1; j < c.points.size(); ++j)
            best = std::min(best, std::abs(c.points[i] - c.points[j]));
    return best;
}

bool same_points_and_labels(const Constellation& a, const Constellation& b, double tol) {
    if (a.points.size() != b.points.size() || a.labels != b.labels) return false;
    for (size_t i = 0; i < a.points.size(); ++i)
        if (std::abs(a.points[i] - b.points[i]) > tol) return false;
    return true;
}

}  // namespace

TEST_CASE("qpsk: Gray labels and geometry") {
    const Constellation c = qpsk(1.0);
    REQUIRE(c.points.size() == 4);
    REQUIRE(c.labels.size() == 4);
    CHECK(c.num_layers() == 1);
    // 00 -> (+,+) = (1+j)/sqrt(2)
    const double a = 1.0 / std::sqrt(2.0);
    CHECK(c.labels[0] == 0);
    CHECK(c.points[0].real() == doctest::Approx(a).epsilon(1e-12));
    CHECK(c.points[0].imag() == doctest::Approx(a).epsilon(1e-12));
    CHECK(c.label_string(0) == "00");
    // 01 -> (+,-), 10 -> (-,+), 11 -> (-,-)
    CHECK(c.points[1].imag() == doctest::Approx(-a).epsilon(1e-12));
    CHECK(c.points[2].real() == doctest::Approx(-a).epsilon(1e-12));
    CHECK(c.points[3].real() == doctest::Approx(-a).epsilon(1e-12));
    CHECK(c.points[3].imag() == doctest::Approx(-a).epsilon(1e-12));
    // mean |p|^2 exactly 1
    CHECK(c.average_energy() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("qpsk: degenerate zero energy keeps labels distinct") {
    const Constellation c = qpsk(0.0);
    std::set<uint32_t> labs(c.labels.begin(), c.labels.end());
    CHECK(labs.size() == 4);
    for (const auto& p : c.points) CHECK(std::abs(p) == 0.0);
    CHECK(c.collision_count > 0);  // coincident points are reported
}

TEST_CASE("qpsk: negative energy rejected") {
    CHECK_THROWS_AS(qpsk(-0.1), std::invalid_argument);
}

TEST_CASE("superpose: single layer reduces to qpsk") {
    const Constellation s = superpose({LayerSpec{1.0, 0.0}}, 1.0);
    CHECK(same_points_and_labels(s, qpsk(1.0), 1e-15));
    const Constellation s2 = superpose({LayerSpec{0.25, 0.0}}, 1.0);
    CHECK(same_points_and_labels(s2, qpsk(0.25), 1e-15));
}

TEST_CASE("superpose: two layers, energies add") {
    const Constellation c = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.0}}, 1.0);
    REQUIRE(c.points.size() == 16);
    CHECK(c.average_energy() == doctest::Approx(1.25).epsilon(1e-13));
    CHECK(c.label_bits == 4);
    CHECK(c.iq_product);
}

TEST_CASE("superpose: minimum distance of (1, 0.25) grid") {
    const Constellation c = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.0}}, 1.0);
    const double enumerated = min_pair_distance(c);
    // All 120 pairs: weak layer spacing 2*sqrt(0.25/2) = 1/sqrt(2).
    CHECK(enumerated == doctest::Approx(0.7071067811865476).epsilon(1e-12));
    CHECK(c.min_distance == doctest::Approx(enumerated).epsilon(1e-12));
    CHECK(c.collision_count == 0);
}

TEST_CASE("superpose: unsorted layers rejected") {
    CHECK_THROWS_AS(superpose({LayerSpec{0.25, 0.0}, LayerSpec{1.0, 0.0}}, 1.0),
                    std::invalid_argument);
}

TEST_CASE("superpose: fraction outside [0,1] rejected") {
    CHECK_THROWS_AS(superpose({LayerSpec{1.5, 0.0}}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(superpose({LayerSpec{-0.1, 0.0}}, 1.0), std::invalid_argument);
}

TEST_CASE("superpose: average energy equals sum of layer energies, L <= 3") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const int layers = 1 + static_cast<int>(rng.bounded(3));
        std::vector<double> f(static_cast<size_t>(layers));
        for (auto& v : f) v = rng.uniform();
        std::sort(f.begin(), f.end(), std::greater<>());
        std::vector<LayerSpec> specs;
        for (double v : f) specs.push_back(LayerSpec{v, 0.0});
        const double es = 0.25 + 2.0 * rng.uniform();
        const Constellation c = superpose(specs, es);
        double expect = 0.0;
        for (double v : f) expect += v * es;
        CHECK(c.average_energy() == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("superpose: label bijectivity holds and collisions are reported") {
    const Constellation ok = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.0}}, 1.0);
    CHECK(ok.collision_count == 0);
    // Equal-power co-phased layers collide (I or Q sums hit zero).
    const Constellation bad = superpose({LayerSpec{1.0, 0.0}, LayerSpec{1.0, 0.0}}, 1.0);
    CHECK(bad.collision_count > 0);
    std::set<uint32_t> labs(bad.labels.begin(), bad.labels.end());
    CHECK(labs.size() == 16);  // labels stay distinct, points are never merged
}

TEST_CASE("superpose: flipping a layer's bit pair moves only that layer") {
    const Constellation c =
        superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.5, 0.0}, LayerSpec{0.2, 0.0}}, 1.0);
    // Flipping bits (3,4) (rank 2) negates exactly the rank-2 component:
    // the displacement is -2 * (that layer's point), independent of the
    // other layers' bits.
    const uint32_t mask = 0b001100;
    const double a2 = std::sqrt(0.5 * 1.0 / 2.0);
    for (size_t i = 0; i < c.points.size(); ++i) {
        const uint32_t flipped = c.labels[i] ^ mask;
        const cplx delta = c.points[flipped] - c.points[i];
        const int b3 = c.bit_at(i, 3), b4 = c.bit_at(i, 4);
        const cplx layer2{a2 * (1 - 2 * b3), a2 * (1 - 2 * b4)};
        CHECK(std::abs(delta - (-2.0 * layer2)) < 1e-12);
    }
}

TEST_CASE("remove_layer: single survivor equals plain qpsk") {
    const Constellation c = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.0}}, 1.0);
    const Constellation r = remove_layer(c, 1);
    CHECK(same_points_and_labels(r, qpsk(0.25), 1e-15));
}

TEST_CASE("remove_layer: survivors re-rank and own new bit positions") {
    const Constellation c =
        superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.5, 0.0}, LayerSpec{0.2, 0.0}}, 1.0);
    const Constellation r = remove_layer(c, 2);
    REQUIRE(r.num_layers() == 2);
    CHECK(r.layer_energies()[0] == doctest::Approx(1.0));
    CHECK(r.layer_energies()[1] == doctest::Approx(0.2));
    const Constellation direct = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.2, 0.0}}, 1.0);
    CHECK(same_points_and_labels(r, direct, 1e-15));
}

TEST_CASE("remove_layer: equal energies keep stable order") {
    const Constellation c =
        superpose({LayerSpec{0.3, 0.0}, LayerSpec{0.3, 0.1}, LayerSpec{0.3, 0.2}}, 1.0);
    const Constellation r = remove_layer(c, 2);
    REQUIRE(r.num_layers() == 2);
    // Survivors are layers 1 and 3 in original order.
    CHECK(r.layer_phases[0] == doctest::Approx(0.0));
    CHECK(r.layer_phases[1] == doctest::Approx(0.2));
}

TEST_CASE("remove_layer: equals superpose of the remaining specs") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> f = {rng.uniform(), rng.uniform(), rng.uniform()};
        std::sort(f.begin(), f.end(), std::greater<>());
        const Constellation c =
            superpose({LayerSpec{f[0], 0.0}, LayerSpec{f[1], 0.0}, LayerSpec{f[2], 0.0}}, 2.0);
        for (int rank = 1; rank <= 3; ++rank) {
            std::vector<LayerSpec> rest;
            for (int l = 0; l < 3; ++l)
                if (l != rank - 1) rest.push_back(LayerSpec{f[static_cast<size_t>(l)], 0.0});
            CHECK(same_points_and_labels(remove_layer(c, rank), superpose(rest, 2.0), 1e-13));
        }
    }
}

TEST_CASE("remove_layer: rank out of range rejected") {
    const Constellation c = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.0}}, 1.0);
    CHECK_THROWS_AS(remove_layer(c, 0), std::invalid_argument);
    CHECK_THROWS_AS(remove_layer(c, 3), std::invalid_argument);
}

TEST_CASE("superposed (1, 0.25) is a uniform grid matching 16-QAM geometry") {
    const Constellation s = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.0}}, 1.0);
    const Constellation q = qam16(1.25);
    auto sorted_points = [](const Constellation& c) {
        std::vector<std::pair<double, double>> v;
        for (const auto& p : c.points) v.emplace_back(p.real(), p.imag());
        std::sort(v.begin(), v.end());
        return v;
    };
    const auto a = sorted_points(s);
    const auto b = sorted_points(q);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].first == doctest::Approx(b[i].first).epsilon(1e-12));
        CHECK(a[i].second == doctest::Approx(b[i].second).epsilon(1e-12));
    }
}

TEST_CASE("qam16: Gray labeling, unit energy") {
    const Constellation c = qam16(1.0);
    REQUIRE(c.points.size() == 16);
    CHECK(c.average_energy() == doctest::Approx(1.0).epsilon(1e-13));
    // Per-dimension Gray property: adjacent I levels differ in one bit.
    std::vector<std::pair<double, uint32_t>> lv;
    for (uint32_t v = 0; v < 4; ++v) lv.emplace_back(c.points[v << 2].real(), v);
    std::sort(lv.begin(), lv.end());
    for (size_t i = 0; i + 1 < lv.size(); ++i)
        CHECK(__builtin_popcount(lv[i].second ^ lv[i + 1].second) == 1);
}

TEST_CASE("superpose: non-zero phase clears the product-grid flag") {
    const Constellation c = superpose({LayerSpec{1.0, 0.0}, LayerSpec{0.25, 0.7}}, 1.0);
    CHECK_FALSE(c.iq_product);
    CHECK(c.average_energy() == doctest::Approx(1.25).epsilon(1e-12));
}
