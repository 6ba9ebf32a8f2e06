#pragma once

// End-to-end Monte Carlo simulation: schedule -> modulate -> impair ->
// relay channel -> cancel -> matched filter -> demap -> decode, for one
// designated sender/receiver pair per frame (all users are statistically
// identical), plus the TDMA baseline.
//
// Determinism contract: every frame draws its randomness from a stream
// derived as frame_seed = derive_seed(derive_seed(master, point_index),
// frame_index), with fixed substream tags for info bits, interferer
// fills, impairments and channel noise. Frames are processed in batches
// of 64; early stopping is evaluated only at batch boundaries. Reports
// are therefore bit-identical for any worker count.
//
// The Es/N0 sweep axis is the per-unit-rho matched-filter SNR
//   Es * G^2 bu^2 bd^2 / (N0u bd^2 G^2 + N0d);
// at each point the configured (n0_u, n0_d) pair is scaled by a common
// factor to hit the target, preserving the uplink:downlink noise ratio.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pncsim/capacity.hpp"
#include "pncsim/config.hpp"
#include "pncsim/constellation.hpp"
#include "pncsim/interleaver.hpp"
#include "pncsim/ldpc.hpp"
#include "pncsim/receiver.hpp"
#include "pncsim/rng.hpp"
#include "pncsim/schedule.hpp"
#include "pncsim/waveform.hpp"

namespace pncsim {

struct ReportRow {
    double snr_db = 0.0;
    long frames = 0;
    long errors = 0;
    double plr = 0.0;
    double throughput = 0.0;  // bits per symbol period
    long converged = 0;
    double avg_iterations = 0.0;
};

struct SimReport {
    std::string mode;  // "scheme", "tdma_qpsk" or "tdma_qam16"
    int modulation_order = 4;
    int bursts = 1;
    double code_rate = 0.0;
    std::string code_source;
    uint64_t code_hash = 0;
    int code_n = 0, code_k = 0;
    double energy_factor = 0.0;  // sum of rhos
    uint64_t config_hash = 0;
    uint64_t master_seed = 0;
    std::vector<ReportRow> rows;

    double throughput_of(double plr) const {
        return std::log2(static_cast<double>(modulation_order)) * bursts * code_rate * (1.0 - plr);
    }

    uint64_t report_hash() const {
        std::ostringstream out;
        out.precision(17);
        out << mode << '|' << modulation_order << '|' << bursts << '|' << code_rate << '|'
            << code_hash << '|' << config_hash << '|' << master_seed << '\n';
        for (const auto& r : rows)
            out << r.snr_db << ',' << r.frames << ',' << r.errors << ',' << r.plr << ','
                << r.throughput << ',' << r.converged << ',' << r.avg_iterations << '\n';
        return fnv1a_str(out.str());
    }

    std::string to_csv() const {
        std::ostringstream out;
        out.precision(12);
        out << "snr_db,frames,errors,plr,throughput,converged,avg_iterations\n";
        for (const auto& r : rows)
            out << r.snr_db << ',' << r.frames << ',' << r.errors << ',' << r.plr << ','
                << r.throughput << ',' << r.converged << ',' << r.avg_iterations << '\n';
        return out.str();
    }
};

enum class SimMode { scheme, tdma_qpsk, tdma_qam16 };

inline const char* to_string(SimMode m) {
    switch (m) {
        case SimMode::scheme: return "scheme";
        case SimMode::tdma_qpsk: return "tdma_qpsk";
        default: return "tdma_qam16";
    }
}

namespace detail {

// Substream tags for per-frame randomness.
enum : uint64_t { kTagInfo = 1, kTagFill = 2, kTagImp = 3, kTagNoise = 4 };

struct FrameOutcome {
    bool error = false;
    bool converged = false;
    int iterations = 0;
};

// Map a bit pair stream to QPSK symbols of the given per-symbol energy.
inline std::vector<cplx> qpsk_map(std::span<const uint8_t> bits, double energy) {
    const double a = std::sqrt(energy / 2.0);
    std::vector<cplx> out(bits.size() / 2);
    for (size_t s = 0; s < out.size(); ++s)
        out[s] = cplx{a * (1.0 - 2.0 * bits[2 * s]), a * (1.0 - 2.0 * bits[2 * s + 1])};
    return out;
}

// Map a bit stream onto an arbitrary labeled constellation (used by the
// 16-QAM TDMA baseline; label positions are consumed MSB-first).
inline std::vector<cplx> label_map(std::span<const uint8_t> bits, const Constellation& c) {
    const int bps = c.label_bits;
    std::vector<cplx> out(bits.size() / static_cast<size_t>(bps));
    for (size_t s = 0; s < out.size(); ++s) {
        uint32_t lab = 0;
        for (int b = 0; b < bps; ++b) lab = (lab << 1) | bits[s * static_cast<size_t>(bps) + static_cast<size_t>(b)];
        // labels are stored in natural order: labels[lab] == lab
        out[s] = c.points[lab];
    }
    return out;
}

struct UserImpairments {
    ImpairmentParams imp;  // delay/cfo constant per frame; phase per slot is added separately
};

inline ImpairmentParams draw_impairments(const SimConfig& cfg, uint64_t frame_seed, int user, long slot) {
    if (cfg.imp.mode == ImpairmentMode::synchronized) return ImpairmentParams{};
    Rng rng(derive_seed(derive_seed(frame_seed, kTagImp, static_cast<uint64_t>(user)), 0));
    ImpairmentParams p;
    p.delay = rng.uniform() * cfg.imp.delay_max_sym;
    if (cfg.imp.integer_delays) p.delay = std::floor(p.delay + 0.5);
    p.cfo = rng.coin() ? cfg.imp.cfo : -cfg.imp.cfo;
    // Phase per (user, slot): cfo already drifts the carrier across slots,
    // the slot tag keeps slot waveforms independent.
    Rng prng(derive_seed(derive_seed(frame_seed, kTagImp, static_cast<uint64_t>(user)), 1 + static_cast<uint64_t>(slot)));
    p.phase = prng.uniform() * kTwoPi;
    return p;
}

struct PointContext {
    const SimConfig* cfg = nullptr;
    const LdpcCode* code = nullptr;
    const Interleaver* ilv = nullptr;
    const RrcPulse* pulse = nullptr;
    SimMode mode = SimMode::scheme;
    ChannelParams chan;      // with noise densities scaled for this point
    double demap_var = 0.0;  // effective noise variance fed to the demapper
    int burst_symbols = 0;
    uint64_t point_seed = 0;
    std::string dump_dir;    // when set, frame 0 dumps symbols/LLRs/waveforms
};

// Raised cosine (the matched-filter cascade of two unit-energy RRCs),
// used for the receiver's interferer tap model.
inline double rc_tap(double t, double rolloff) {
    const double pi = std::numbers::pi;
    const double sinc = std::fabs(t) < 1e-12 ? 1.0 : std::sin(pi * t) / (pi * t);
    const double den = 1.0 - 4.0 * rolloff * rolloff * t * t;
    if (std::fabs(den) < 1e-9) return sinc * pi / 4.0;
    return sinc * std::cos(pi * rolloff * t) / den;
}

// Demapper model of one asynchronous interfering layer: the two dominant
// raised-cosine taps at the wanted user's sampling offset, rotated per
// symbol by the receiver-known relative carrier. Everything here is
// deterministic given perfect channel estimation; the remaining tail
// taps (a few percent of the interferer energy) are absorbed into the
// demapper noise variance.
struct InterfererModel {
    std::array<cplx, 4> points{};  // the layer's QPSK points
    double tap0 = 1.0;             // weight of the chain's current symbol
    double tap1 = 0.0;             // weight of the chain's next symbol
    double cfo = 0.0;
    double phase0 = 0.0;  // relative phase at wanted-symbol time zero
    double energy = 0.0;

    static InterfererModel build(double energy, double rolloff, const ImpairmentParams& own,
                                 const ImpairmentParams& wanted) {
        InterfererModel m;
        m.energy = energy;
        const double delta = wanted.delay - own.delay;
        const double mu = delta - std::floor(delta);
        m.tap0 = rc_tap(mu, rolloff);
        m.tap1 = rc_tap(mu - 1.0, rolloff);
        const double a = std::sqrt(energy / 2.0);
        m.points = {cplx{a, a}, cplx{a, -a}, cplx{-a, a}, cplx{-a, -a}};
        // Relative carrier at the wanted sampling instants t_k = k + d_w:
        // theta_i(t_k) - theta_w(t_k) evaluated at k = 0, then advancing by
        // the cfo difference per symbol.
        m.cfo = own.cfo - wanted.cfo;
        m.phase0 = own.phase - wanted.phase + kTwoPi * (own.cfo - wanted.cfo) * wanted.delay;
        return m;
    }

    cplx rotation(double k_sym) const { return std::polar(1.0, kTwoPi * cfo * k_sym + phase0); }
};

// Forward-backward soft demapper for one slot under asynchronous
// interference. Each interferer contributes tap0 * c_k + tap1 * c_{k+1}
// of its own symbol chain; the joint chain over all interferers is
// marginalized exactly (memory-one trellis, one forward and one backward
// pass), and the wanted user's bits are read out per symbol. No other
// user's data is decoded and nothing is iterated or cancelled.
inline LlrFrame demap_async_slot(std::span<const cplx> symbols, double wanted_energy,
                                 std::span<const InterfererModel> interferers, double noise_var,
                                 bool max_log) {
    (void)max_log;
    const size_t n = symbols.size();
    const double a = std::sqrt(wanted_energy / 2.0);
    const cplx wpts[4] = {{a, a}, {a, -a}, {-a, a}, {-a, -a}};
    const double inv_nv = 1.0 / noise_var;
    const size_t num_i = interferers.size();

    if (num_i > 3)
        throw std::invalid_argument(
            "demap_async_slot: at most 3 interfering layers per slot are supported");
    LlrFrame out;
    out.values.resize(2 * n);
    size_t states = 1;
    for (size_t i = 0; i < num_i; ++i) states *= 4;

    if (states == 1) {
        // No interference left on this slot: plain QPSK LLRs.
        Constellation c;
        c.label_bits = 2;
        c.points.assign(wpts, wpts + 4);
        c.labels = {0, 1, 2, 3};
        const int positions[2] = {1, 2};
        out.values = bit_llrs(symbols, c, positions, noise_var, false);
        return out;
    }

    // Per-symbol interferer sums v_k(s, t) for state s = current chain
    // symbols, branch t = next chain symbols.
    const size_t trans = states * states;
    std::vector<cplx> v(trans);
    std::vector<double> gmarg(n * trans);         // emissions marginal over the wanted symbol
    std::vector<double> gw(4);                    // per wanted symbol, scratch
    std::vector<double> alpha((n + 1) * states);  // normalized forward messages
    std::vector<double> emis(n * trans * 4);      // per wanted symbol emissions

    for (size_t k = 0; k < n; ++k) {
        // Rotated tap contributions of each interferer at this instant.
        cplx rot0[8], rot1[8];
        for (size_t i = 0; i < num_i; ++i) {
            const cplx rot = interferers[i].rotation(static_cast<double>(k));
            rot0[i] = rot * interferers[i].tap0;
            rot1[i] = rot * interferers[i].tap1;
        }
        for (size_t s = 0; s < states; ++s) {
            cplx base{0.0, 0.0};
            size_t rs = s;
            for (size_t i = 0; i < num_i; ++i) {
                base += rot0[i] * interferers[i].points[rs & 3];
                rs >>= 2;
            }
            for (size_t t = 0; t < states; ++t) {
                cplx sum = base;
                size_t rt = t;
                for (size_t i = 0; i < num_i; ++i) {
                    sum += rot1[i] * interferers[i].points[rt & 3];
                    rt >>= 2;
                }
                v[s * states + t] = sum;
            }
        }
        for (size_t st = 0; st < trans; ++st) {
            double m = 0.0;
            for (int w = 0; w < 4; ++w) {
                const double e = fast_exp(-std::norm(symbols[k] - wpts[w] - v[st]) * inv_nv);
                emis[(k * trans + st) * 4 + static_cast<size_t>(w)] = e;
                m += e;
            }
            gmarg[k * trans + st] = m;
        }
    }

    // Forward pass (normalized each step).
    for (size_t s = 0; s < states; ++s) alpha[s] = 1.0 / static_cast<double>(states);
    for (size_t k = 0; k < n; ++k) {
        double* next = &alpha[(k + 1) * states];
        const double* cur = &alpha[k * states];
        double total = 0.0;
        for (size_t t = 0; t < states; ++t) {
            double acc = 0.0;
            for (size_t s = 0; s < states; ++s) acc += cur[s] * gmarg[k * trans + s * states + t];
            next[t] = acc;
            total += acc;
        }
        const double inv = total > 0 ? 1.0 / total : 1.0;
        for (size_t t = 0; t < states; ++t) next[t] *= inv;
    }

    // Backward pass with per-symbol bit readout.
    std::vector<double> beta(states, 1.0 / static_cast<double>(states));
    std::vector<double> beta_prev(states);
    for (size_t k = n; k-- > 0;) {
        const double* cur = &alpha[k * states];
        double bit0[2] = {0.0, 0.0};  // P(bit = 0) accumulators for the two positions
        double bit1[2] = {0.0, 0.0};
        for (size_t s = 0; s < states; ++s) {
            if (cur[s] == 0.0) continue;
            for (size_t t = 0; t < states; ++t) {
                const double w_st = cur[s] * beta[t];
                if (w_st == 0.0) continue;
                const double* e = &emis[(k * trans + s * states + t) * 4];
                // Wanted labels: bit1 = I sign, bit2 = Q sign (0 = +).
                bit0[0] += w_st * (e[0] + e[1]);
                bit1[0] += w_st * (e[2] + e[3]);
                bit0[1] += w_st * (e[0] + e[2]);
                bit1[1] += w_st * (e[1] + e[3]);
            }
        }
        for (int b = 0; b < 2; ++b) {
            const double llr = std::log(std::max(bit0[b], 1e-300)) - std::log(std::max(bit1[b], 1e-300));
            out.values[2 * k + static_cast<size_t>(b)] =
                llr > kLlrClamp ? kLlrClamp : (llr < -kLlrClamp ? -kLlrClamp : llr);
        }
        // beta_prev(s) = sum_t G(s, t) beta(t), normalized.
        double total = 0.0;
        for (size_t s = 0; s < states; ++s) {
            double acc = 0.0;
            for (size_t t = 0; t < states; ++t) acc += gmarg[k * trans + s * states + t] * beta[t];
            beta_prev[s] = acc;
            total += acc;
        }
        const double inv = total > 0 ? 1.0 / total : 1.0;
        for (size_t s = 0; s < states; ++s) beta_prev[s] *= inv;
        std::swap(beta, beta_prev);
    }
    return out;
}

// One scheme frame: returns decode outcome for the designated pair
// (sender = user 1, receiver = user 2).
inline FrameOutcome run_scheme_frame(const PointContext& ctx, long frame_idx, BpDecoder& decoder) {
    const SimConfig& cfg = *ctx.cfg;
    const SchemeParams& sp = cfg.scheme;
    const int nb = sp.bursts_per_codeword;
    const uint64_t frame_seed = derive_seed(ctx.point_seed, static_cast<uint64_t>(frame_idx));
    const int sender = 1;
    const int receiver = listener_of(sender, sp);
    const double tg = ctx.chan.through_gain();
    const double es_eff = ctx.chan.es * tg * tg;

    // Sender codeword.
    Rng info_rng(derive_seed(frame_seed, kTagInfo));
    std::vector<uint8_t> info(static_cast<size_t>(ctx.code->k));
    for (auto& b : info) b = static_cast<uint8_t>(info_rng.next() >> 63);
    const std::vector<uint8_t> cw = ctx.code->encode(info);
    const std::vector<uint8_t> tx_bits = ctx.ilv->interleave(std::span<const uint8_t>(cw));

    std::vector<LlrFrame> slot_llrs(static_cast<size_t>(nb));
    const size_t bits_per_burst = 2 * static_cast<size_t>(ctx.burst_symbols);

    for (int j = 1; j <= nb; ++j) {
        const long slot = slots_for_codeword(sender, 1, sp).first + (j - 1);
        const SlotAssignment assign = transmitters_on_slot(slot, sp);

        std::vector<Waveform> uplinks;
        uplinks.reserve(assign.entries.size());
        std::optional<Waveform> receiver_replica;  // through-gain applied
        ImpairmentParams sender_imp;

        for (const auto& entry : assign.entries) {
            const double rho = cfg.alloc.rhos[static_cast<size_t>(entry.burst_index - 1)];
            std::vector<cplx> symbols;
            if (entry.user == sender) {
                const size_t off = static_cast<size_t>(entry.burst_index - 1) * bits_per_burst;
                symbols = qpsk_map(std::span<const uint8_t>(tx_bits).subspan(off, bits_per_burst),
                                   rho * ctx.chan.es);
            } else {
                Rng fill(derive_seed(derive_seed(frame_seed, kTagFill, static_cast<uint64_t>(entry.user)),
                                     static_cast<uint64_t>(slot)));
                std::vector<uint8_t> bits(bits_per_burst);
                for (auto& b : bits) b = static_cast<uint8_t>(fill.next() >> 63);
                symbols = qpsk_map(bits, rho * ctx.chan.es);
            }
            const ImpairmentParams imp = draw_impairments(cfg, frame_seed, entry.user, slot);
            Waveform w = impair(shape(symbols, *ctx.pulse), imp);
            if (entry.user == sender) sender_imp = imp;
            if (entry.user == receiver) receiver_replica = scale_waveform(w, tg);
            uplinks.push_back(std::move(w));
        }

        Rng noise(derive_seed(derive_seed(frame_seed, kTagNoise), static_cast<uint64_t>(slot)));
        Waveform rx = relay_channel(uplinks, ctx.chan, noise);
        if (receiver_replica) rx = cancel_self(rx, *receiver_replica);

        const auto symbols = matched_filter_sample(rx, *ctx.pulse, sender_imp, ctx.burst_symbols);

        if (cfg.imp.mode == ImpairmentMode::asynchronous) {
            // Interfering layers are marginalized over their two dominant
            // raised-cosine taps at the receiver-known timing and carrier;
            // unmodeled tails widen the noise variance.
            std::vector<detail::InterfererModel> models;
            double wanted_energy = 0.0;
            double tail_energy = 0.0;
            for (const auto& entry : assign.entries) {
                if (entry.user == receiver) continue;
                const double e = cfg.alloc.rhos[static_cast<size_t>(entry.burst_index - 1)] * es_eff;
                if (entry.user == sender) {
                    wanted_energy = e;
                    continue;
                }
                const ImpairmentParams imp = draw_impairments(cfg, frame_seed, entry.user, slot);
                models.push_back(detail::InterfererModel::build(e, ctx.pulse->rolloff, imp, sender_imp));
                tail_energy += e;
            }
            const double var = ctx.demap_var + cfg.rx.isi_allowance * tail_energy;
            slot_llrs[static_cast<size_t>(j - 1)] =
                detail::demap_async_slot(symbols, wanted_energy, models, var, cfg.rx.max_log);
        } else {
            // Synchronized: residual layers form the co-phased superposed
            // constellation; burst order is descending energy order.
            std::vector<LayerSpec> layers;
            int wanted_rank = 0;
            for (const auto& entry : assign.entries) {
                if (entry.user == receiver) continue;
                layers.push_back(
                    LayerSpec{cfg.alloc.rhos[static_cast<size_t>(entry.burst_index - 1)], 0.0});
                if (entry.user == sender) wanted_rank = static_cast<int>(layers.size());
            }
            const Constellation c = superpose(layers, es_eff);
            slot_llrs[static_cast<size_t>(j - 1)] =
                demap_layer_llrs_rank(symbols, c, wanted_rank, ctx.demap_var, cfg.rx.max_log);
        }
        slot_llrs[static_cast<size_t>(j - 1)].slot = slot;

        if (!ctx.dump_dir.empty() && frame_idx == 0) {
            std::ofstream sym(ctx.dump_dir + "/slot" + std::to_string(slot) + "_symbols.csv");
            sym << "re,im\n";
            for (const auto& s : symbols) sym << s.real() << ',' << s.imag() << '\n';
            std::ofstream llr(ctx.dump_dir + "/slot" + std::to_string(slot) + "_llrs.csv");
            llr << "llr\n";
            for (double v : slot_llrs[static_cast<size_t>(j - 1)].values) llr << v << '\n';
            std::ofstream hist(ctx.dump_dir + "/slot" + std::to_string(slot) + "_llr_hist.csv");
            hist << "bin_low,bin_high,count\n";
            constexpr int kBins = 40;
            std::array<long, kBins> counts{};
            for (double v : slot_llrs[static_cast<size_t>(j - 1)].values) {
                const int b = static_cast<int>((v + kLlrClamp) / (2.0 * kLlrClamp) * kBins);
                counts[static_cast<size_t>(std::clamp(b, 0, kBins - 1))]++;
            }
            for (int b = 0; b < kBins; ++b)
                hist << (-kLlrClamp + b * 2.0 * kLlrClamp / kBins) << ','
                     << (-kLlrClamp + (b + 1) * 2.0 * kLlrClamp / kBins) << ','
                     << counts[static_cast<size_t>(b)] << '\n';
            write_iq(ctx.dump_dir + "/slot" + std::to_string(slot) + "_rx.iq", rx);
        }
    }

    const LlrFrame assembled = assemble_codeword(slot_llrs, *ctx.ilv);
    const DecodeResult dec = decoder.decode(assembled.values);
    FrameOutcome out;
    out.converged = dec.converged;
    out.iterations = dec.iterations;
    out.error = !dec.converged || ctx.code->extract_info(dec.bits) != info;
    return out;
}

// One TDMA frame: single transmitter, whole codeword in one slot.
inline FrameOutcome run_tdma_frame(const PointContext& ctx, long frame_idx, BpDecoder& decoder,
                                   const Constellation& mod) {
    const SimConfig& cfg = *ctx.cfg;
    const uint64_t frame_seed = derive_seed(ctx.point_seed, static_cast<uint64_t>(frame_idx));
    const double tg = ctx.chan.through_gain();

    Rng info_rng(derive_seed(frame_seed, kTagInfo));
    std::vector<uint8_t> info(static_cast<size_t>(ctx.code->k));
    for (auto& b : info) b = static_cast<uint8_t>(info_rng.next() >> 63);
    const std::vector<uint8_t> cw = ctx.code->encode(info);
    const std::vector<uint8_t> tx_bits = ctx.ilv->interleave(std::span<const uint8_t>(cw));

    const std::vector<cplx> symbols = label_map(tx_bits, mod);
    const ImpairmentParams imp = draw_impairments(cfg, frame_seed, 1, 1);
    Waveform w = impair(shape(symbols, *ctx.pulse), imp);

    Rng noise(derive_seed(derive_seed(frame_seed, kTagNoise), 1));
    std::vector<Waveform> ups;
    ups.push_back(std::move(w));
    const Waveform rx = relay_channel(ups, ctx.chan, noise);
    const auto y = matched_filter_sample(rx, *ctx.pulse, imp, static_cast<int>(symbols.size()));

    std::vector<int> positions(static_cast<size_t>(mod.label_bits));
    for (int b = 0; b < mod.label_bits; ++b) positions[static_cast<size_t>(b)] = b + 1;
    // Rebuild the constellation at the received amplitude.
    Constellation eff = mod;
    for (size_t i = 0; i < mod.points.size(); ++i) eff.points[i] = mod.points[i] * tg;
    eff.base_energy = mod.base_energy * tg * tg;

    LlrFrame frame;
    frame.values = bit_llrs(y, eff, positions, ctx.demap_var, cfg.rx.max_log);
    const LlrFrame assembled = assemble_codeword({frame}, *ctx.ilv);
    const DecodeResult dec = decoder.decode(assembled.values);
    FrameOutcome out;
    out.converged = dec.converged;
    out.iterations = dec.iterations;
    out.error = !dec.converged || ctx.code->extract_info(dec.bits) != info;
    return out;
}

}  // namespace detail

struct SimContext {
    SimConfig cfg;
    LdpcCode code;
    Interleaver ilv;
    RrcPulse pulse;

    explicit SimContext(SimConfig c)
        : cfg(std::move(c)),
          code(LdpcCode::load(cfg.fec.matrix_path)),
          ilv(static_cast<size_t>(code.n), cfg.fec.interleaver_seed),
          pulse(make_rrc(cfg.phy.oversampling, cfg.phy.rolloff, cfg.phy.span)) {}
};

// Scale (n0_u, n0_d) so the per-unit-rho Es/N0 equals the target;
// infinity means a noiseless run.
inline ChannelParams channel_at_snr(const SimConfig& cfg, double snr_db) {
    ChannelParams cp = cfg.chan;
    if (std::isinf(snr_db)) {
        cp.n0_u = 0.0;
        cp.n0_d = 0.0;
        return cp;
    }
    const double g2 = cp.gain * cp.gain * cp.beta_d * cp.beta_d;
    const double ref = cfg.chan.n0_u * g2 + cfg.chan.n0_d;
    if (!(ref > 0.0))
        throw std::runtime_error("simulate: chan.n0_u and chan.n0_d are both zero; use snr_db = inf");
    const double num = cp.es * cp.gain * cp.gain * cp.beta_u * cp.beta_u * cp.beta_d * cp.beta_d;
    const double target_noise = num / std::pow(10.0, snr_db / 10.0);
    const double t = target_noise / ref;
    cp.n0_u = cfg.chan.n0_u * t;
    cp.n0_d = cfg.chan.n0_d * t;
    return cp;
}

inline ReportRow run_point(const SimContext& ctx, double snr_db, size_t point_index, SimMode mode) {
    const SimConfig& cfg = ctx.cfg;
    cfg.validate();

    detail::PointContext pc;
    pc.cfg = &cfg;
    pc.code = &ctx.code;
    pc.ilv = &ctx.ilv;
    pc.pulse = &ctx.pulse;
    pc.mode = mode;
    pc.chan = channel_at_snr(cfg, snr_db);
    pc.point_seed = derive_seed(cfg.sim.master_seed, 0xF0 + point_index,
                                static_cast<uint64_t>(mode));
    pc.dump_dir = cfg.dump_dir;

    const int nb = mode == SimMode::scheme ? cfg.scheme.bursts_per_codeword : 1;
    const int bps = mode == SimMode::tdma_qam16 ? 4 : 2;
    if (ctx.code.n % (bps * nb) != 0)
        throw std::runtime_error("simulate: codeword length must split into equal bursts of whole symbols");
    pc.burst_symbols = ctx.code.n / (bps * nb);

    const double tg = pc.chan.through_gain();
    const double strongest =
        (mode == SimMode::scheme ? cfg.alloc.rhos.front() : 1.0) * pc.chan.es * tg * tg;
    pc.demap_var = std::max(pc.chan.effective_noise(), cfg.rx.noise_floor * std::max(strongest, 1e-300));

    Constellation tdma_mod;
    if (mode == SimMode::tdma_qpsk) tdma_mod = qpsk(pc.chan.es);
    if (mode == SimMode::tdma_qam16) tdma_mod = qam16(pc.chan.es);

    if (!pc.dump_dir.empty()) std::filesystem::create_directories(pc.dump_dir);

    const long frames = cfg.sim.frames;
    const long stop_errors = cfg.sim.stop_errors;
    constexpr long kBatch = 64;
    const int nthreads = std::max(1, cfg.sim.threads > 0 ? cfg.sim.threads
                                                         : static_cast<int>(std::thread::hardware_concurrency()));

    std::atomic<long> errors{0}, converged{0};
    std::atomic<long> iter_sum{0};
    long frames_run = 0;

    for (long batch_start = 0; batch_start < frames; batch_start += kBatch) {
        const long batch_end = std::min(frames, batch_start + kBatch);
        std::atomic<long> next{batch_start};
        auto worker = [&] {
            BpDecoder decoder(ctx.code, cfg.fec.decoder, cfg.fec.max_iters, cfg.fec.minsum_scale);
            for (;;) {
                const long f = next.fetch_add(1);
                if (f >= batch_end) break;
                detail::FrameOutcome out;
                if (mode == SimMode::scheme) out = detail::run_scheme_frame(pc, f, decoder);
                else out = detail::run_tdma_frame(pc, f, decoder, tdma_mod);
                if (out.error) errors.fetch_add(1);
                if (out.converged) converged.fetch_add(1);
                iter_sum.fetch_add(out.iterations);
            }
        };
        if (nthreads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        frames_run = batch_end;
        if (stop_errors > 0 && errors.load() >= stop_errors) break;
    }

    ReportRow row;
    row.snr_db = snr_db;
    row.frames = frames_run;
    row.errors = errors.load();
    row.plr = static_cast<double>(row.errors) / static_cast<double>(row.frames);
    const double m_order = mode == SimMode::tdma_qam16 ? 16.0 : 4.0;
    row.throughput = std::log2(m_order) * nb * ctx.code.rate() * (1.0 - row.plr);
    row.converged = converged.load();
    row.avg_iterations = static_cast<double>(iter_sum.load()) / static_cast<double>(row.frames);
    return row;
}

inline SimReport run_sweep(const SimContext& ctx, SimMode mode) {
    const SimConfig& cfg = ctx.cfg;
    SimReport rep;
    rep.mode = to_string(mode);
    rep.modulation_order = mode == SimMode::tdma_qam16 ? 16 : 4;
    rep.bursts = mode == SimMode::scheme ? cfg.scheme.bursts_per_codeword : 1;
    rep.code_rate = ctx.code.rate();
    rep.code_source = ctx.code.source;
    rep.code_hash = ctx.code.matrix_hash;
    rep.code_n = ctx.code.n;
    rep.code_k = ctx.code.k;
    rep.energy_factor = mode == SimMode::scheme ? ctx.cfg.alloc.sum() : 1.0;
    rep.config_hash = cfg.hash();
    rep.master_seed = cfg.sim.master_seed;

    std::vector<double> sweep = cfg.sim.snr_db;
    std::sort(sweep.begin(), sweep.end());
    for (size_t i = 0; i < sweep.size(); ++i) rep.rows.push_back(run_point(ctx, sweep[i], i, mode));
    return rep;
}

inline SimReport run_tdma_baseline(const SimContext& ctx, TdmaModulation mod) {
    if (mod == TdmaModulation::none) throw std::invalid_argument("run_tdma_baseline: modulation required");
    return run_sweep(ctx, mod == TdmaModulation::qpsk ? SimMode::tdma_qpsk : SimMode::tdma_qam16);
}

}  // namespace pncsim
