#pragma once

// LDPC code container, systematic encoder and belief-propagation decoder.
//
// Encoding works for any parity-check matrix: at load time H is
// Gauss-Jordan reduced over GF(2), scanning pivots from the rightmost
// column backwards. Non-pivot columns become the information positions
// (the prefix 1..k whenever the last-m-columns block is invertible, which
// holds for all shipped matrices); each pivot row then gives one parity
// bit as an XOR of information bits. Rank deficiency is tolerated and
// surfaced as a warning (k = n - rank).
//
// LLR convention throughout: positive value means bit 0 is more likely.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pncsim/alist.hpp"
#include "pncsim/rng.hpp"

namespace pncsim {

struct LdpcCode {
    int n = 0;  // codeword length
    int m = 0;  // parity-check rows as given
    int k = 0;  // information length = n - rank(H)
    std::vector<std::vector<int>> row_cols;  // check -> variable adjacency
    std::vector<std::vector<int>> col_rows;  // variable -> check adjacency

    std::vector<int> info_positions;    // size k, ascending
    bool systematic_prefix = false;     // info positions are exactly 0..k-1
    bool rank_deficient = false;
    std::vector<std::string> warnings;

    std::string source;      // file path or tag, for reports
    uint64_t matrix_hash = 0;

    double rate() const { return static_cast<double>(k) / static_cast<double>(n); }

    static LdpcCode from_alist(const AlistMatrix& a, std::string source_tag);
    static LdpcCode load(const std::string& path) { return from_alist(read_alist(path), path); }

    // Systematic encode: |info| == k, returns n bits with H c^T = 0.
    std::vector<uint8_t> encode(std::span<const uint8_t> info) const;

    bool parity_ok(std::span<const uint8_t> codeword) const {
        for (const auto& row : row_cols) {
            unsigned s = 0;
            for (int v : row) s ^= codeword[static_cast<size_t>(v)];
            if (s & 1u) return false;
        }
        return true;
    }

    std::vector<uint8_t> extract_info(std::span<const uint8_t> codeword) const {
        std::vector<uint8_t> info(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) info[static_cast<size_t>(i)] = codeword[static_cast<size_t>(info_positions[static_cast<size_t>(i)])];
        return info;
    }

  private:
    // Encoder tables: pivot row i fixes codeword bit pivot_cols[i] as the
    // XOR of the row's information-position bits.
    std::vector<int> pivot_cols_;
    std::vector<std::vector<uint64_t>> pivot_rows_;  // dense bitsets over n
    size_t words_ = 0;
};

inline LdpcCode LdpcCode::from_alist(const AlistMatrix& a, std::string source_tag) {
    LdpcCode code;
    code.n = a.n;
    code.m = a.m;
    code.row_cols = a.row_cols;
    code.col_rows = a.col_rows;
    code.source = std::move(source_tag);

    uint64_t h = 0xCBF29CE484222325ull;
    h = fnv1a(&code.n, sizeof code.n, h);
    h = fnv1a(&code.m, sizeof code.m, h);
    for (const auto& row : code.row_cols)
        for (int v : row) h = fnv1a(&v, sizeof v, h);
    code.matrix_hash = h;

    // Gauss-Jordan over GF(2) on a dense copy of H.
    const size_t words = static_cast<size_t>((a.n + 63) / 64);
    code.words_ = words;
    std::vector<std::vector<uint64_t>> rows(static_cast<size_t>(a.m), std::vector<uint64_t>(words, 0));
    for (int r = 0; r < a.m; ++r)
        for (int c : a.row_cols[static_cast<size_t>(r)])
            rows[static_cast<size_t>(r)][static_cast<size_t>(c) / 64] |= uint64_t{1} << (static_cast<size_t>(c) % 64);

    std::vector<char> row_used(static_cast<size_t>(a.m), 0);
    std::vector<char> col_is_pivot(static_cast<size_t>(a.n), 0);
    std::vector<int> pivot_row_of;  // aligned with pivot_cols_
    auto get_bit = [&](const std::vector<uint64_t>& row, int c) {
        return (row[static_cast<size_t>(c) / 64] >> (static_cast<size_t>(c) % 64)) & 1u;
    };
    for (int c = a.n - 1; c >= 0; --c) {
        int pivot = -1;
        for (int r = 0; r < a.m; ++r) {
            if (!row_used[static_cast<size_t>(r)] && get_bit(rows[static_cast<size_t>(r)], c)) { pivot = r; break; }
        }
        if (pivot < 0) continue;
        row_used[static_cast<size_t>(pivot)] = 1;
        col_is_pivot[static_cast<size_t>(c)] = 1;
        code.pivot_cols_.push_back(c);
        pivot_row_of.push_back(pivot);
        for (int r = 0; r < a.m; ++r) {
            if (r == pivot || !get_bit(rows[static_cast<size_t>(r)], c)) continue;
            for (size_t w = 0; w < words; ++w) rows[static_cast<size_t>(r)][w] ^= rows[static_cast<size_t>(pivot)][w];
        }
    }
    // Snapshot pivot rows only after the elimination is complete: later
    // pivots keep editing earlier rows, so each final row references its
    // own pivot column plus information columns only.
    code.pivot_rows_.reserve(pivot_row_of.size());
    for (int r : pivot_row_of) code.pivot_rows_.push_back(rows[static_cast<size_t>(r)]);

    const int rank = static_cast<int>(code.pivot_cols_.size());
    code.k = a.n - rank;
    if (rank < a.m) {
        code.rank_deficient = true;
        code.warnings.push_back("parity-check matrix is rank deficient: " + std::to_string(a.m) +
                                " rows, rank " + std::to_string(rank) +
                                "; using k = n - rank = " + std::to_string(code.k));
    }
    if (code.k <= 0) throw std::runtime_error("ldpc: matrix has no information positions (rate 0)");
    code.info_positions.reserve(static_cast<size_t>(code.k));
    for (int c = 0; c < a.n; ++c)
        if (!col_is_pivot[static_cast<size_t>(c)]) code.info_positions.push_back(c);
    code.systematic_prefix = (code.info_positions.back() == code.k - 1);
    if (!code.systematic_prefix)
        code.warnings.push_back("information positions are not the codeword prefix (last-m-columns block singular)");
    return code;
}

inline std::vector<uint8_t> LdpcCode::encode(std::span<const uint8_t> info) const {
    if (static_cast<int>(info.size()) != k) throw std::invalid_argument("encode: info length must equal k");
    std::vector<uint64_t> cw(words_, 0);
    for (int i = 0; i < k; ++i) {
        if (info[static_cast<size_t>(i)] & 1u) {
            const int c = info_positions[static_cast<size_t>(i)];
            cw[static_cast<size_t>(c) / 64] ^= uint64_t{1} << (static_cast<size_t>(c) % 64);
        }
    }
    for (size_t p = 0; p < pivot_cols_.size(); ++p) {
        const auto& row = pivot_rows_[p];
        uint64_t acc = 0;
        for (size_t w = 0; w < words_; ++w) acc ^= row[w] & cw[w];
        if (__builtin_parityll(acc)) {
            const int c = pivot_cols_[p];
            cw[static_cast<size_t>(c) / 64] ^= uint64_t{1} << (static_cast<size_t>(c) % 64);
        }
    }
    std::vector<uint8_t> out(static_cast<size_t>(n));
    for (int c = 0; c < n; ++c)
        out[static_cast<size_t>(c)] = static_cast<uint8_t>((cw[static_cast<size_t>(c) / 64] >> (static_cast<size_t>(c) % 64)) & 1u);
    return out;
}

struct DecodeResult {
    std::vector<uint8_t> bits;  // hard decisions on all n positions
    bool converged = false;     // all parity checks satisfied
    int iterations = 0;
};

enum class DecoderAlgo { sum_product, min_sum };

// Belief-propagation decoder. Holds per-edge working buffers; use one
// instance per concurrent worker.
class BpDecoder {
  public:
    explicit BpDecoder(const LdpcCode& code, DecoderAlgo algo = DecoderAlgo::sum_product,
                       int max_iters = 50, double minsum_scale = 1.0)
        : code_(&code), algo_(algo), max_iters_(max_iters), minsum_scale_(minsum_scale) {
        if (max_iters < 1) throw std::invalid_argument("BpDecoder: max_iters must be >= 1");
        size_t edges = 0;
        for (const auto& row : code.row_cols) edges += row.size();
        edge_var_.reserve(edges);
        check_begin_.reserve(code.row_cols.size() + 1);
        check_begin_.push_back(0);
        for (const auto& row : code.row_cols) {
            for (int v : row) edge_var_.push_back(v);
            check_begin_.push_back(static_cast<int>(edge_var_.size()));
        }
        var_edges_.resize(static_cast<size_t>(code.n));
        for (size_t e = 0; e < edge_var_.size(); ++e) var_edges_[static_cast<size_t>(edge_var_[e])].push_back(static_cast<int>(e));
        v2c_.resize(edges);
        c2v_.assign(edges, 0.0);
        hard_.resize(static_cast<size_t>(code.n));
        scratch_.resize(64);
        tanhs_.resize(64);
    }

    int max_iters() const { return max_iters_; }

    DecodeResult decode(std::span<const double> llrs) {
        const auto& code = *code_;
        if (static_cast<int>(llrs.size()) != code.n) throw std::invalid_argument("decode: LLR length must equal n");
        for (double v : llrs)
            if (!std::isfinite(v)) throw std::invalid_argument("decode: non-finite LLR");

        std::fill(c2v_.begin(), c2v_.end(), 0.0);
        DecodeResult res;
        res.bits.resize(static_cast<size_t>(code.n));

        for (int iter = 1; iter <= max_iters_; ++iter) {
            // Variable update: v2c = channel + sum of other checks.
            for (int v = 0; v < code.n; ++v) {
                double total = llrs[static_cast<size_t>(v)];
                for (int e : var_edges_[static_cast<size_t>(v)]) total += c2v_[static_cast<size_t>(e)];
                for (int e : var_edges_[static_cast<size_t>(v)]) v2c_[static_cast<size_t>(e)] = total - c2v_[static_cast<size_t>(e)];
            }
            // Check update.
            const int checks = static_cast<int>(code.row_cols.size());
            for (int c = 0; c < checks; ++c) {
                const int b = check_begin_[static_cast<size_t>(c)];
                const int e = check_begin_[static_cast<size_t>(c) + 1];
                const int deg = e - b;
                if (deg > static_cast<int>(scratch_.size())) scratch_.resize(static_cast<size_t>(deg));
                if (deg > static_cast<int>(tanhs_.size())) tanhs_.resize(static_cast<size_t>(deg));
                if (algo_ == DecoderAlgo::sum_product) {
                    // Leave-one-out products of tanh(v/2) via prefix/suffix.
                    double prefix = 1.0;
                    for (int t = 0; t < deg; ++t) {
                        tanhs_[static_cast<size_t>(t)] = std::tanh(0.5 * clamp_msg(v2c_[static_cast<size_t>(b + t)]));
                        scratch_[static_cast<size_t>(t)] = prefix;
                        prefix *= tanhs_[static_cast<size_t>(t)];
                    }
                    double suffix = 1.0;
                    for (int t = deg - 1; t >= 0; --t) {
                        const double prod = scratch_[static_cast<size_t>(t)] * suffix;
                        c2v_[static_cast<size_t>(b + t)] = 2.0 * std::atanh(clamp_tanh(prod));
                        suffix *= tanhs_[static_cast<size_t>(t)];
                    }
                } else {
                    // Min-sum: sign product and two smallest magnitudes.
                    int sign = 0;
                    double min1 = 1e300, min2 = 1e300;
                    int argmin = -1;
                    for (int t = 0; t < deg; ++t) {
                        const double v = v2c_[static_cast<size_t>(b + t)];
                        if (v < 0) sign ^= 1;
                        const double mag = std::fabs(v);
                        if (mag < min1) { min2 = min1; min1 = mag; argmin = t; }
                        else if (mag < min2) { min2 = mag; }
                    }
                    for (int t = 0; t < deg; ++t) {
                        const double v = v2c_[static_cast<size_t>(b + t)];
                        const int s = sign ^ (v < 0 ? 1 : 0);
                        const double mag = (t == argmin ? min2 : min1) * minsum_scale_;
                        c2v_[static_cast<size_t>(b + t)] = s ? -mag : mag;
                    }
                }
            }
            // Posterior, hard decision, syndrome. A bit with posterior
            // exactly zero is undecided; never declare convergence on it.
            bool ok = true;
            for (int v = 0; v < code.n; ++v) {
                double total = llrs[static_cast<size_t>(v)];
                for (int e : var_edges_[static_cast<size_t>(v)]) total += c2v_[static_cast<size_t>(e)];
                if (total == 0.0) ok = false;
                hard_[static_cast<size_t>(v)] = total < 0.0 ? 1 : 0;
            }
            for (int c = 0; c < checks && ok; ++c) {
                unsigned s = 0;
                for (int t = check_begin_[static_cast<size_t>(c)]; t < check_begin_[static_cast<size_t>(c) + 1]; ++t)
                    s ^= hard_[static_cast<size_t>(edge_var_[static_cast<size_t>(t)])];
                if (s & 1u) ok = false;
            }
            res.iterations = iter;
            if (ok) {
                res.converged = true;
                break;
            }
        }
        std::copy(hard_.begin(), hard_.end(), res.bits.begin());
        return res;
    }

  private:
    static double clamp_msg(double v) { return v > 40.0 ? 40.0 : (v < -40.0 ? -40.0 : v); }
    static double clamp_tanh(double t) {
        constexpr double lim = 1.0 - 1e-15;
        return t > lim ? lim : (t < -lim ? -lim : t);
    }

    const LdpcCode* code_;
    DecoderAlgo algo_;
    int max_iters_;
    double minsum_scale_;
    std::vector<int> edge_var_;
    std::vector<int> check_begin_;
    std::vector<std::vector<int>> var_edges_;
    std::vector<double> v2c_, c2v_, scratch_, tanhs_;
    std::vector<uint8_t> hard_;
};

}  // namespace pncsim
