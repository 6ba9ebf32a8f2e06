#pragma once

// Labeled signal sets: plain QPSK, superpositions of QPSK layers at
// different power levels, and Gray 16-QAM for the TDMA baseline.
//
// Conventions (shared by mapper, demapper and the capacity code):
//   * QPSK Gray labeling: 00 -> (+,+), 01 -> (+,-), 10 -> (-,+), 11 -> (-,-),
//     i.e. the first bit selects the I sign, the second the Q sign, 0 = +.
//   * In a superposition with L layers, layers are ranked by descending
//     energy (ties keep input order) and the rank-l layer owns bit
//     positions 2l-1 and 2l of the label (positions are 1-based, position 1
//     is the most significant printed bit).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pncsim {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// One QPSK layer of a superposed constellation.
struct LayerSpec {
    double energy_fraction = 1.0;  // rho, in [0, 1]
    double phase = 0.0;            // relative carrier phase, radians
};

struct Constellation {
    std::vector<cplx> points;
    std::vector<uint32_t> labels;  // label of points[i]; position 1 = MSB of label_bits
    int label_bits = 0;

    // Layer bookkeeping; empty for non-layered sets (16-QAM baseline).
    double base_energy = 0.0;            // E_s the fractions refer to
    std::vector<double> layer_fractions; // rho_l, descending
    std::vector<double> layer_phases;    // same order as layer_fractions

    // True when all layers are co-phased; the points then form an I/Q
    // product grid and per-dimension factorizations are exact.
    bool iq_product = false;

    // Degenerate-geometry report: pairs closer than the collision
    // tolerance are counted, never merged.
    int collision_count = 0;
    double min_distance = std::numeric_limits<double>::infinity();

    int num_layers() const { return static_cast<int>(layer_fractions.size()); }

    std::vector<double> layer_energies() const {
        std::vector<double> e(layer_fractions.size());
        for (size_t i = 0; i < e.size(); ++i) e[i] = layer_fractions[i] * base_energy;
        return e;
    }

    double average_energy() const {
        double s = 0.0;
        for (const auto& p : points) s += std::norm(p);
        return points.empty() ? 0.0 : s / static_cast<double>(points.size());
    }

    // Bit value (0/1) at 1-based label position.
    int bit_at(size_t point_index, int position) const {
        return static_cast<int>((labels[point_index] >> (label_bits - position)) & 1u);
    }

    std::string label_string(size_t point_index) const {
        std::string s(static_cast<size_t>(label_bits), '0');
        for (int p = 1; p <= label_bits; ++p)
            s[static_cast<size_t>(p - 1)] = static_cast<char>('0' + bit_at(point_index, p));
        return s;
    }
};

namespace detail {

inline cplx qpsk_point(int bit_i, int bit_q, double amplitude, double phase) {
    const cplx base{amplitude * (1 - 2 * bit_i), amplitude * (1 - 2 * bit_q)};
    if (phase == 0.0) return base;
    return base * std::polar(1.0, phase);
}

inline void finish_geometry(Constellation& c, double collision_tol) {
    const size_t m = c.points.size();
    c.collision_count = 0;
    c.min_distance = std::numeric_limits<double>::infinity();
    if (m <= 4096) {
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = i + 1; j < m; ++j) {
                const double d = std::abs(c.points[i] - c.points[j]);
                c.min_distance = std::min(c.min_distance, d);
                if (d <= collision_tol) ++c.collision_count;
            }
        }
        if (m < 2) c.min_distance = std::numeric_limits<double>::quiet_NaN();
    } else {
        // Large sets: collision count via spatial hashing, min distance
        // not reported.
        c.min_distance = std::numeric_limits<double>::quiet_NaN();
        struct Cell { long x, y; bool operator<(const Cell& o) const { return x < o.x || (x == o.x && y < o.y); } };
        const double cell = std::max(collision_tol, 1e-300);
        std::vector<std::pair<Cell, size_t>> keyed(m);
        for (size_t i = 0; i < m; ++i)
            keyed[i] = {{static_cast<long>(std::floor(c.points[i].real() / cell)),
                         static_cast<long>(std::floor(c.points[i].imag() / cell))}, i};
        std::sort(keyed.begin(), keyed.end(), [](auto& a, auto& b) { return a.first < b.first; });
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = i + 1; j < m && !(keyed[i].first < keyed[j].first); ++j) {
                if (std::abs(c.points[keyed[i].second] - c.points[keyed[j].second]) <= collision_tol)
                    ++c.collision_count;
            }
        }
    }
}

}  // namespace detail

// Gray-labeled QPSK with the given average symbol energy.
inline Constellation qpsk(double energy) {
    if (!(energy >= 0.0)) throw std::invalid_argument("qpsk: energy must be nonnegative");
    Constellation c;
    c.label_bits = 2;
    c.base_energy = energy;
    c.layer_fractions = {1.0};
    c.layer_phases = {0.0};
    c.iq_product = true;
    const double a = std::sqrt(energy / 2.0);
    c.points.reserve(4);
    c.labels.reserve(4);
    for (uint32_t lab = 0; lab < 4; ++lab) {
        c.points.push_back(detail::qpsk_point((lab >> 1) & 1, lab & 1, a, 0.0));
        c.labels.push_back(lab);
    }
    detail::finish_geometry(c, 1e-9 * std::sqrt(energy));
    return c;
}

// Superposition of QPSK layers. `layers` must be sorted by descending
// energy_fraction (ties keep input order); the rank-l layer gets bit
// positions 2l-1 and 2l. Per-layer symbol energy is energy_fraction * E_s.
inline Constellation superpose(const std::vector<LayerSpec>& layers, double base_energy) {
    const size_t num = layers.size();
    if (num < 1 || num > 8) throw std::invalid_argument("superpose: need 1..8 layers");
    if (!(base_energy >= 0.0)) throw std::invalid_argument("superpose: negative base energy");
    for (size_t l = 0; l < num; ++l) {
        const double f = layers[l].energy_fraction;
        if (!std::isfinite(f) || f < 0.0 || f > 1.0)
            throw std::invalid_argument("superpose: energy fraction outside [0,1]");
        if (!std::isfinite(layers[l].phase))
            throw std::invalid_argument("superpose: non-finite phase");
        if (l > 0 && layers[l].energy_fraction > layers[l - 1].energy_fraction)
            throw std::invalid_argument("superpose: layers must be sorted by descending energy");
    }

    Constellation c;
    c.label_bits = static_cast<int>(2 * num);
    c.base_energy = base_energy;
    c.iq_product = true;
    std::vector<cplx> rotations(num);
    std::vector<double> amps(num);
    for (size_t l = 0; l < num; ++l) {
        double ph = std::fmod(layers[l].phase, kTwoPi);
        if (ph < 0) ph += kTwoPi;
        c.layer_fractions.push_back(layers[l].energy_fraction);
        c.layer_phases.push_back(ph);
        if (ph != 0.0) c.iq_product = false;
        rotations[l] = std::polar(1.0, ph);
        amps[l] = std::sqrt(layers[l].energy_fraction * base_energy / 2.0);
    }

    const size_t count = size_t{1} << (2 * num);
    c.points.resize(count);
    c.labels.resize(count);
    for (size_t lab = 0; lab < count; ++lab) {
        cplx sum{0.0, 0.0};
        for (size_t l = 0; l < num; ++l) {
            // Layer l's bits are the l-th pair from the top of the label.
            const int shift = static_cast<int>(2 * (num - 1 - l));
            const int bi = static_cast<int>((lab >> (shift + 1)) & 1u);
            const int bq = static_cast<int>((lab >> shift) & 1u);
            cplx p = detail::qpsk_point(bi, bq, amps[l], 0.0);
            if (c.layer_phases[l] != 0.0) p *= rotations[l];
            sum += p;
        }
        c.points[lab] = sum;
        c.labels[lab] = static_cast<uint32_t>(lab);
    }
    detail::finish_geometry(c, 1e-9 * std::sqrt(base_energy));
    return c;
}

// Remove the rank-th layer; survivors are re-ranked by descending energy
// (stable) and bit positions recomputed. Removing the only layer yields
// the degenerate one-point set.
inline Constellation remove_layer(const Constellation& c, int rank) {
    const int layers = c.num_layers();
    if (layers == 0) throw std::invalid_argument("remove_layer: constellation is not layered");
    if (rank < 1 || rank > layers) throw std::invalid_argument("remove_layer: rank out of range");
    if (layers == 1) {
        Constellation empty;
        empty.base_energy = c.base_energy;
        empty.points = {cplx{0.0, 0.0}};
        empty.labels = {0};
        empty.label_bits = 0;
        empty.min_distance = std::numeric_limits<double>::quiet_NaN();
        return empty;
    }
    std::vector<LayerSpec> rest;
    rest.reserve(static_cast<size_t>(layers) - 1);
    for (int l = 0; l < layers; ++l) {
        if (l == rank - 1) continue;
        rest.push_back(LayerSpec{c.layer_fractions[static_cast<size_t>(l)],
                                 c.layer_phases[static_cast<size_t>(l)]});
    }
    return superpose(rest, c.base_energy);
}

// Gray-labeled square 16-QAM with the given average symbol energy; used
// by the TDMA baseline. Bits 1-2 pick the I level, bits 3-4 the Q level,
// Gray order (00,01,11,10) -> (-3,-1,+1,+3). Not a layered set.
inline Constellation qam16(double energy) {
    if (!(energy >= 0.0)) throw std::invalid_argument("qam16: energy must be nonnegative");
    static constexpr int kGrayLevel[4] = {-3, -1, +3, +1};  // indexed by the 2-bit value
    Constellation c;
    c.label_bits = 4;
    c.base_energy = energy;
    const double a = std::sqrt(energy / 10.0);
    c.points.reserve(16);
    c.labels.reserve(16);
    for (uint32_t lab = 0; lab < 16; ++lab) {
        const int li = kGrayLevel[(lab >> 2) & 3u];
        const int lq = kGrayLevel[lab & 3u];
        c.points.push_back(cplx{a * li, a * lq});
        c.labels.push_back(lab);
    }
    detail::finish_geometry(c, 1e-9 * std::sqrt(energy));
    return c;
}

}  // namespace pncsim
