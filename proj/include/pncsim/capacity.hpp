#pragma once

// Per-layer mutual information, achievable rate and power-allocation
// search for the superposition scheme.
//
// Mutual information of a label bit is estimated by Monte Carlo with the
// exact log-sum-exp integrand:
//   I(b;Y) = 1 - E[ log2( S_all / S_b ) ],  S_X = sum_{x in X} exp(-|y-x|^2/s2)
// For co-phased layers the constellation is an I/Q product grid and the
// per-sample value factorizes exactly per dimension; that fast path is an
// algebraic rewrite, not an approximation. Evaluation seeds are derived
// from (noise variance, layer energies, positions, base seed), so any two
// evaluations of the same quantity agree bit-for-bit regardless of
// threading; results are memoized on the same key.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "pncsim/constellation.hpp"
#include "pncsim/fastmath.hpp"
#include "pncsim/rng.hpp"
#include "pncsim/schedule.hpp"
#include "pncsim/waveform.hpp"

namespace pncsim {

struct PowerAllocation {
    std::vector<double> rhos;  // descending, each in [0, 1]

    void validate() const {
        if (rhos.empty()) throw std::invalid_argument("PowerAllocation: empty");
        for (size_t i = 0; i < rhos.size(); ++i) {
            if (!std::isfinite(rhos[i]) || rhos[i] < 0.0 || rhos[i] > 1.0)
                throw std::invalid_argument("PowerAllocation: rho outside [0,1]");
            if (i > 0 && rhos[i] > rhos[i - 1])
                throw std::invalid_argument("PowerAllocation: rhos must be descending");
        }
    }
    double sum() const {
        double s = 0.0;
        for (double r : rhos) s += r;
        return s;
    }
};

struct MiEstimate {
    double value = 0.0;      // bits
    double std_error = 0.0;  // Monte Carlo standard error of `value`
};

struct CapacityOptions {
    size_t samples = 200000;        // per MI evaluation during optimization
    size_t final_samples = 2000000; // for the reported/refined value
    uint64_t base_seed = 0x5EEDULL;
    int threads = 0;                // 0 = hardware concurrency
    bool phase_average = false;     // average MI over random relative layer phases
    int phase_draws = 16;
};

namespace detail {

inline uint64_t mi_eval_seed(uint64_t base, double noise_var, std::span<const double> levels_key,
                             std::span<const int> positions) {
    uint64_t h = 0xCBF29CE484222325ull;
    h = fnv1a(&noise_var, sizeof noise_var, h);
    for (double v : levels_key) h = fnv1a(&v, sizeof v, h);
    for (int p : positions) h = fnv1a(&p, sizeof p, h);
    return derive_seed(base, h);
}

// General 2D estimator over the labeled point set.
inline MiEstimate mi_bits_general(const Constellation& c, std::span<const int> positions,
                                  double noise_var, size_t samples, uint64_t seed) {
    const size_t m = c.points.size();
    Rng rng(seed);
    const double sigma_dim = std::sqrt(noise_var / 2.0);
    std::vector<double> metric(m);
    double acc = 0.0, acc2 = 0.0;
    const double inv_ln2 = 1.4426950408889634073599246810019;
    for (size_t it = 0; it < samples; ++it) {
        const size_t idx = static_cast<size_t>(rng.bounded(m));
        double zr, zi;
        rng.normal_pair(zr, zi);
        const cplx y = c.points[idx] + cplx{sigma_dim * zr, sigma_dim * zi};
        double best = -1e300;
        for (size_t j = 0; j < m; ++j) {
            metric[j] = -std::norm(y - c.points[j]) / noise_var;
            if (metric[j] > best) best = metric[j];
        }
        double s_all = 0.0;
        for (size_t j = 0; j < m; ++j) {
            metric[j] = fast_exp(metric[j] - best);
            s_all += metric[j];
        }
        double sample_bits = 0.0;
        for (int pos : positions) {
            const int b = c.bit_at(idx, pos);
            double s_b = 0.0;
            for (size_t j = 0; j < m; ++j)
                if (c.bit_at(j, pos) == b) s_b += metric[j];
            sample_bits += 1.0 - std::log(s_all / s_b) * inv_ln2;
        }
        acc += sample_bits;
        acc2 += sample_bits * sample_bits;
    }
    MiEstimate e;
    e.value = acc / static_cast<double>(samples);
    const double var = std::max(0.0, acc2 / static_cast<double>(samples) - e.value * e.value);
    e.std_error = std::sqrt(var / static_cast<double>(samples));
    return e;
}

// Factorized estimator for co-phased layer grids. Consumes randomness
// exactly like the general path (point index + one I/Q normal pair per
// sample) and computes the identical per-sample quantity per dimension.
// The log-sum-exp shift is the transmitted combo's own metric, which
// bounds every shifted exponent safely without a max scan.
inline MiEstimate mi_bits_factorized(const Constellation& c, std::span<const int> positions,
                                     double noise_var, size_t samples, uint64_t seed) {
    const int L = c.num_layers();
    const size_t combos = size_t{1} << L;
    // Per-dimension amplitude of each layer (I and Q are identical).
    std::vector<double> amp(static_cast<size_t>(L));
    for (int l = 0; l < L; ++l)
        amp[static_cast<size_t>(l)] = std::sqrt(c.layer_fractions[static_cast<size_t>(l)] * c.base_energy / 2.0);
    // Level of each sign combo; combo bit l set means layer-l bit = 1 (-).
    std::vector<double> level(combos);
    for (size_t s = 0; s < combos; ++s) {
        double v = 0.0;
        for (int l = 0; l < L; ++l) v += ((s >> l) & 1u) ? -amp[static_cast<size_t>(l)] : amp[static_cast<size_t>(l)];
        level[s] = v;
    }
    // Queried layers per dimension (a layer owns one I and one Q bit).
    size_t query_mask[2] = {0, 0};
    std::vector<int> query_layers[2];
    for (int pos : positions) {
        const int dim = 1 - (pos & 1);  // odd positions are I, even are Q
        query_mask[dim] |= size_t{1} << ((pos - 1) / 2);
        query_layers[dim].push_back((pos - 1) / 2);
    }
    // Multiplicative 0/1 class masks per queried layer and dimension.
    std::vector<std::vector<double>> set_mask[2];
    for (int dim = 0; dim < 2; ++dim) {
        for (int l : query_layers[dim]) {
            std::vector<double> msk(combos);
            for (size_t s = 0; s < combos; ++s) msk[s] = ((s >> l) & 1u) ? 1.0 : 0.0;
            set_mask[dim].push_back(std::move(msk));
        }
    }

    // Transmitted sign combos per constellation point, both dimensions.
    const size_t m = c.points.size();
    const int bits_total = c.label_bits;
    std::vector<uint32_t> tx_of(2 * m);
    for (size_t i = 0; i < m; ++i) {
        const uint32_t label = c.labels[i];
        uint32_t ci = 0, cq = 0;
        for (int l = 0; l < L; ++l) {
            if ((label >> (bits_total - (2 * l + 1))) & 1u) ci |= uint32_t{1} << l;
            if ((label >> (bits_total - (2 * l + 2))) & 1u) cq |= uint32_t{1} << l;
        }
        tx_of[2 * i] = ci;
        tx_of[2 * i + 1] = cq;
    }

    Rng rng(seed);
    const double sigma_dim = std::sqrt(noise_var / 2.0);
    const double inv_nv = 1.0 / noise_var;
    const double inv_ln2 = 1.4426950408889634073599246810019;
    std::vector<double> w(combos);
    double acc = 0.0, acc2 = 0.0;

    auto kernel = [&](auto combos_c, size_t idx, double zr, double zi) {
        constexpr size_t kCombos = combos_c();
        const size_t n_combos = kCombos ? kCombos : combos;
        double sample_bits = 0.0;
        for (int dim = 0; dim < 2; ++dim) {
            if (query_layers[dim].empty()) continue;
            const size_t tx_combo = tx_of[2 * idx + static_cast<size_t>(dim)];
            const double z = (dim == 0 ? zr : zi) * sigma_dim;
            const double y = level[tx_combo] + z;
            const double shift = z * z * inv_nv;  // minus the tx combo's metric
            const double* lvl = level.data();
            double* wp = w.data();
            for (size_t s = 0; s < n_combos; ++s) {
                const double d = y - lvl[s];
                wp[s] = shift - d * d * inv_nv;
            }
            for (size_t s = 0; s < n_combos; ++s) wp[s] = fast_exp(wp[s]);
            double s_all = 0.0;
            for (size_t s = 0; s < n_combos; ++s) s_all += wp[s];
            for (size_t qi = 0; qi < query_layers[dim].size(); ++qi) {
                const double* msk = set_mask[dim][qi].data();
                double s_set = 0.0;
                for (size_t s = 0; s < n_combos; ++s) s_set += wp[s] * msk[s];
                const size_t lbit = size_t{1} << query_layers[dim][qi];
                const double s_b = (tx_combo & lbit) ? s_set : s_all - s_set;
                sample_bits += 1.0 - std::log(s_all / s_b) * inv_ln2;
            }
        }
        return sample_bits;
    };

    auto run_loop = [&](auto combos_c) {
        for (size_t it = 0; it < samples; ++it) {
            const size_t idx = static_cast<size_t>(rng.bounded(m));
            double zr, zi;
            rng.normal_pair(zr, zi);
            const double sample_bits = kernel(combos_c, idx, zr, zi);
            acc += sample_bits;
            acc2 += sample_bits * sample_bits;
        }
    };
    // Fixed trip counts let the compiler vectorize the hot cases.
    switch (combos) {
        case 2: run_loop([] { return size_t{2}; }); break;
        case 4: run_loop([] { return size_t{4}; }); break;
        case 8: run_loop([] { return size_t{8}; }); break;
        case 16: run_loop([] { return size_t{16}; }); break;
        default: run_loop([] { return size_t{0}; }); break;
    }
    MiEstimate e;
    e.value = acc / static_cast<double>(samples);
    const double var = std::max(0.0, acc2 / static_cast<double>(samples) - e.value * e.value);
    e.std_error = std::sqrt(var / static_cast<double>(samples));
    return e;
}

}  // namespace detail

// Monte Carlo mutual information summed over the given 1-based label
// positions; deterministic given (constellation, noise_var, samples, seed).
inline MiEstimate mutual_info_bits(const Constellation& c, std::span<const int> positions,
                                   double noise_var, size_t samples, uint64_t seed) {
    if (!(noise_var > 0.0)) throw std::invalid_argument("mutual_info_bits: noise variance must be positive");
    if (samples < 1000) throw std::invalid_argument("mutual_info_bits: need at least 1000 samples");
    for (int p : positions)
        if (p < 1 || p > c.label_bits) throw std::invalid_argument("mutual_info_bits: position out of range");
    if (c.iq_product && c.num_layers() >= 1)
        return detail::mi_bits_factorized(c, positions, noise_var, samples, seed);
    return detail::mi_bits_general(c, positions, noise_var, samples, seed);
}

// Capacity of one layer (its two bit positions) under complex AWGN.
inline double layer_capacity(const Constellation& c, int layer_rank, double noise_var,
                             size_t samples, uint64_t seed) {
    if (layer_rank < 1 || layer_rank > c.num_layers())
        throw std::invalid_argument("layer_capacity: invalid layer rank");
    const int positions[2] = {2 * layer_rank - 1, 2 * layer_rank};
    return mutual_info_bits(c, positions, noise_var, samples, seed).value;
}

struct RatePoint {
    double snr = 0.0;  // per-unit-rho Es/N0 at the demapper, linear
    PowerAllocation allocation;
    double rate_per_user = 0.0;                 // R_a, bits per channel use per user
    std::vector<double> layer_capacities;       // C^1_chi, C^2_{chi\1}, ...
    double search_rate = 0.0;                   // optimizer-stage estimate (low samples)
    double sum_capacity() const {
        double s = 0.0;
        for (double c : layer_capacities) s += c;
        return s;
    }
};

namespace detail {

struct MiMemo {
    std::map<std::vector<int64_t>, MiEstimate> cache;
    std::mutex mu;
};

// Layer capacity of the sub-constellation built from `fractions` (already
// descending) at target rank, with optional memoization.
inline MiEstimate alloc_layer_capacity(std::span<const double> fractions, double base_energy,
                                       int rank, double noise_var, size_t samples,
                                       uint64_t base_seed, MiMemo* memo) {
    std::vector<int64_t> key;
    key.reserve(fractions.size() + 4);
    key.push_back(static_cast<int64_t>(samples));
    key.push_back(rank);
    auto quant = [](double v) { return static_cast<int64_t>(std::llround(v * 1e12)); };
    key.push_back(quant(noise_var));
    key.push_back(quant(base_energy));
    for (double f : fractions) key.push_back(quant(f));
    if (memo) {
        std::lock_guard<std::mutex> lock(memo->mu);
        auto it = memo->cache.find(key);
        if (it != memo->cache.end()) return it->second;
    }
    std::vector<LayerSpec> specs(fractions.size());
    for (size_t i = 0; i < fractions.size(); ++i) specs[i] = LayerSpec{fractions[i], 0.0};
    const Constellation c = superpose(specs, base_energy);
    const int positions[2] = {2 * rank - 1, 2 * rank};
    std::vector<double> levels_key(fractions.begin(), fractions.end());
    levels_key.push_back(base_energy);
    const uint64_t seed = mi_eval_seed(base_seed, noise_var, levels_key, positions);
    const MiEstimate v = mutual_info_bits(c, positions, noise_var, samples, seed);
    if (memo) {
        std::lock_guard<std::mutex> lock(memo->mu);
        memo->cache.emplace(std::move(key), v);
    }
    return v;
}

// Sum of layer capacities entering the achievable rate: the strongest
// layer of the full superposition, then for each i the layer that held
// energy rho_{i+1} inside chi-without-layer-i (rank i after removal).
inline std::vector<MiEstimate> rate_terms(std::span<const double> rhos, double base_energy,
                                          double noise_var, size_t samples, uint64_t base_seed,
                                          MiMemo* memo) {
    const int nb = static_cast<int>(rhos.size());
    std::vector<MiEstimate> terms;
    terms.reserve(static_cast<size_t>(nb));
    terms.push_back(alloc_layer_capacity(rhos, base_energy, 1, noise_var, samples, base_seed, memo));
    for (int i = 1; i < nb; ++i) {
        std::vector<double> rest;
        rest.reserve(static_cast<size_t>(nb) - 1);
        for (int j = 0; j < nb; ++j)
            if (j != i - 1) rest.push_back(rhos[static_cast<size_t>(j)]);
        terms.push_back(alloc_layer_capacity(rest, base_energy, i, noise_var, samples, base_seed, memo));
    }
    return terms;
}

}  // namespace detail

// Phase-averaged layer capacity (sensitivity studies): MI averaged over
// uniformly random relative layer phases, general-path evaluation.
inline double layer_capacity_phase_averaged(std::span<const double> fractions, double base_energy,
                                            int rank, double noise_var, size_t samples,
                                            uint64_t seed, int draws) {
    if (draws < 1) throw std::invalid_argument("layer_capacity_phase_averaged: draws must be >= 1");
    Rng rng(seed);
    double acc = 0.0;
    for (int d = 0; d < draws; ++d) {
        std::vector<LayerSpec> specs(fractions.size());
        for (size_t l = 0; l < fractions.size(); ++l)
            specs[l] = LayerSpec{fractions[l], l == 0 ? 0.0 : rng.uniform() * kTwoPi};
        const Constellation c = superpose(specs, base_energy);
        const int positions[2] = {2 * rank - 1, 2 * rank};
        acc += detail::mi_bits_general(c, positions, noise_var, samples, derive_seed(seed, static_cast<uint64_t>(d))).value;
    }
    return acc / draws;
}

// Achievable rate of an allocation through the relay channel, using the
// slot-SNR noise denominator and the end-to-end symbol amplitude.
inline RatePoint achievable_rate(const PowerAllocation& alloc, const ChannelParams& cp,
                                 const SchemeParams& p, const CapacityOptions& opt = {}) {
    alloc.validate();
    p.validate();
    if (static_cast<int>(alloc.rhos.size()) != p.bursts_per_codeword)
        throw std::invalid_argument("achievable_rate: |rhos| must equal N_b");
    const double g = cp.through_gain();
    const double es_eff = cp.es * g * g;
    const double noise = cp.effective_noise();
    if (!(noise > 0.0)) throw std::domain_error("achievable_rate: zero effective noise");
    RatePoint rp;
    rp.allocation = alloc;
    rp.snr = es_eff / noise;
    if (opt.phase_average) {
        // Sensitivity mode: each capacity term averaged over uniformly
        // random relative layer phases instead of the co-phased grid.
        const int nb = p.bursts_per_codeword;
        const size_t per_draw = std::max<size_t>(1000, opt.final_samples / static_cast<size_t>(opt.phase_draws));
        rp.layer_capacities.push_back(layer_capacity_phase_averaged(
            alloc.rhos, es_eff, 1, noise, per_draw, derive_seed(opt.base_seed, 0), opt.phase_draws));
        for (int i = 1; i < nb; ++i) {
            std::vector<double> rest;
            for (int j = 0; j < nb; ++j)
                if (j != i - 1) rest.push_back(alloc.rhos[static_cast<size_t>(j)]);
            rp.layer_capacities.push_back(layer_capacity_phase_averaged(
                rest, es_eff, i, noise, per_draw, derive_seed(opt.base_seed, static_cast<uint64_t>(i)),
                opt.phase_draws));
        }
    } else {
        for (const auto& t : detail::rate_terms(alloc.rhos, es_eff, noise, opt.final_samples,
                                                opt.base_seed, nullptr))
            rp.layer_capacities.push_back(t.value);
    }
    rp.rate_per_user = rp.sum_capacity() / p.num_users;
    rp.search_rate = rp.rate_per_user;
    return rp;
}

// Long-code rate matching the average per-slot rate: sum(C) / (2 N_b).
inline double recommended_code_rate(const RatePoint& rp, const SchemeParams& p) {
    return rp.sum_capacity() / (2.0 * p.bursts_per_codeword);
}

namespace detail {

inline void enumerate_descending(int depth, int nb, int max_idx, int steps, double step,
                                 std::vector<double>& cur, std::vector<std::vector<double>>& out) {
    if (depth == nb) {
        out.push_back(cur);
        return;
    }
    for (int i = max_idx; i >= 0; --i) {
        cur[static_cast<size_t>(depth)] = std::min(1.0, i * step);
        enumerate_descending(depth + 1, nb, i, steps, step, cur, out);
    }
    (void)steps;
}

}  // namespace detail

// Exhaustive descending-grid search for the rate-maximizing allocation at
// a given per-unit-rho Es/N0 (linear), followed by one refinement pass at
// grid_step/10 around the winner. Deterministic tie-break: the
// lexicographically largest allocation wins.
inline RatePoint optimize_allocation(double snr_linear, const SchemeParams& p, double grid_step,
                                     const CapacityOptions& opt = {}) {
    p.validate();
    if (!(snr_linear > 0.0)) throw std::invalid_argument("optimize_allocation: SNR must be positive");
    if (!(grid_step > 0.0) || grid_step > 0.25)
        throw std::invalid_argument("optimize_allocation: grid step must be in (0, 0.25]");
    const int nb = p.bursts_per_codeword;
    const double noise_var = 1.0 / snr_linear;  // unit through-gain, Es = 1

    detail::MiMemo memo;
    struct Scored {
        double rate = 0.0;
        double se = 0.0;  // standard error of `rate`
    };
    auto evaluate_all = [&](const std::vector<std::vector<double>>& cands, size_t samples)
        -> std::vector<Scored> {
        std::vector<Scored> rates(cands.size());
        const int nthreads = std::max(1, opt.threads > 0 ? opt.threads
                                                         : static_cast<int>(std::thread::hardware_concurrency()));
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= cands.size()) break;
                const auto terms =
                    detail::rate_terms(cands[i], 1.0, noise_var, samples, opt.base_seed, &memo);
                double s = 0.0, var = 0.0;
                for (const auto& t : terms) {
                    s += t.value;
                    var += t.std_error * t.std_error;
                }
                rates[i] = {s / p.num_users, std::sqrt(var) / p.num_users};
            }
        };
        if (nthreads == 1 || cands.size() < 2) {
            worker();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(static_cast<size_t>(nthreads));
            for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        return rates;
    };

    // Candidates whose estimated rates differ by less than the combined
    // Monte Carlo uncertainty are treated as tied; the lexicographically
    // largest allocation wins a tie. The scan order is fixed, so the
    // outcome never depends on threading.
    auto pick_best = [](const std::vector<std::vector<double>>& cands,
                        const std::vector<Scored>& rates, size_t& best_idx) {
        best_idx = 0;
        for (size_t i = 1; i < cands.size(); ++i) {
            const double band = 3.0 * (rates[i].se + rates[best_idx].se);
            if (rates[i].rate > rates[best_idx].rate + band ||
                (rates[i].rate > rates[best_idx].rate - band && cands[i] > cands[best_idx]))
                best_idx = i;
        }
    };

    // Coarse pass.
    const int steps = static_cast<int>(std::floor(1.0 / grid_step + 1e-9));
    std::vector<std::vector<double>> cands;
    std::vector<double> cur(static_cast<size_t>(nb));
    detail::enumerate_descending(0, nb, steps, steps, grid_step, cur, cands);
    std::vector<Scored> rates = evaluate_all(cands, opt.samples);
    size_t best;
    pick_best(cands, rates, best);
    std::vector<double> best_alloc = cands[best];
    Scored best_rate = rates[best];

    // Refinement around the winner at step/10.
    const double fine = grid_step / 10.0;
    std::vector<std::vector<double>> fine_cands;
    std::vector<double> fine_cur(static_cast<size_t>(nb));
    std::vector<std::vector<double>> axis_values(static_cast<size_t>(nb));
    for (int d = 0; d < nb; ++d) {
        for (int t = -5; t <= 5; ++t) {
            const double v = best_alloc[static_cast<size_t>(d)] + t * fine;
            if (v < -1e-12 || v > 1.0 + 1e-12) continue;
            axis_values[static_cast<size_t>(d)].push_back(std::min(1.0, std::max(0.0, v)));
        }
    }
    std::vector<size_t> pick(static_cast<size_t>(nb), 0);
    for (;;) {
        bool ok = true;
        for (int d = 0; d < nb; ++d) {
            fine_cur[static_cast<size_t>(d)] = axis_values[static_cast<size_t>(d)][pick[static_cast<size_t>(d)]];
            if (d > 0 && fine_cur[static_cast<size_t>(d)] > fine_cur[static_cast<size_t>(d - 1)] + 1e-12) ok = false;
        }
        if (ok) fine_cands.push_back(fine_cur);
        int d = nb - 1;
        while (d >= 0 && ++pick[static_cast<size_t>(d)] == axis_values[static_cast<size_t>(d)].size()) {
            pick[static_cast<size_t>(d)] = 0;
            --d;
        }
        if (d < 0) break;
    }
    std::vector<Scored> fine_rates = evaluate_all(fine_cands, opt.samples);
    size_t fbest;
    pick_best(fine_cands, fine_rates, fbest);
    {
        const double band = 3.0 * (fine_rates[fbest].se + best_rate.se);
        if (fine_rates[fbest].rate > best_rate.rate + band ||
            (fine_rates[fbest].rate > best_rate.rate - band && fine_cands[fbest] > best_alloc)) {
            best_alloc = fine_cands[fbest];
            best_rate = fine_rates[fbest];
        }
    }

    // Report the winner re-evaluated at high precision.
    RatePoint rp;
    rp.snr = snr_linear;
    rp.allocation = PowerAllocation{best_alloc};
    for (const auto& t : detail::rate_terms(best_alloc, 1.0, noise_var, opt.final_samples,
                                            opt.base_seed, nullptr))
        rp.layer_capacities.push_back(t.value);
    rp.rate_per_user = rp.sum_capacity() / p.num_users;
    rp.search_rate = best_rate.rate;
    return rp;
}

// Convenience: QPSK capacity (both bits) at a linear Es/N0.
inline double qpsk_capacity(double snr_linear, size_t samples, uint64_t seed) {
    const Constellation c = qpsk(1.0);
    const int positions[2] = {1, 2};
    return mutual_info_bits(c, positions, 1.0 / snr_linear, samples, seed).value;
}


}  // namespace pncsim
