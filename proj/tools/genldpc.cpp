// Progressive-edge-growth LDPC construction. Writes an alist file whose
// last n-k columns form an invertible block, so the loaded code encodes
// with the information bits as the codeword prefix.
//
// PEG: variable nodes are processed in order; each new edge goes to the
// check node at maximal girth distance in the current graph (smallest
// degree among candidates, random tie-break from --seed).

#include <algorithm>
#include <iostream>
#include <queue>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pncsim/alist.hpp"
#include "pncsim/ldpc.hpp"
#include "pncsim/rng.hpp"

namespace {

struct Graph {
    int n, m;
    std::vector<std::vector<int>> var_checks;
    std::vector<std::vector<int>> check_vars;
    std::vector<int> check_degree;
};

// BFS from a variable node; returns per-check distance (-1 = unreachable).
std::vector<int> check_distances(const Graph& g, int var) {
    std::vector<int> vdist(static_cast<size_t>(g.n), -1);
    std::vector<int> cdist(static_cast<size_t>(g.m), -1);
    std::queue<int> q;
    vdist[static_cast<size_t>(var)] = 0;
    q.push(var);
    while (!q.empty()) {
        const int v = q.front();
        q.pop();
        for (int c : g.var_checks[static_cast<size_t>(v)]) {
            if (cdist[static_cast<size_t>(c)] >= 0) continue;
            cdist[static_cast<size_t>(c)] = vdist[static_cast<size_t>(v)] + 1;
            for (int v2 : g.check_vars[static_cast<size_t>(c)]) {
                if (vdist[static_cast<size_t>(v2)] >= 0) continue;
                vdist[static_cast<size_t>(v2)] = cdist[static_cast<size_t>(c)] + 1;
                q.push(v2);
            }
        }
    }
    return cdist;
}

Graph peg_construct(int n, int m, int var_degree, pncsim::Rng& rng) {
    Graph g{n, m, {}, {}, {}};
    g.var_checks.resize(static_cast<size_t>(n));
    g.check_vars.resize(static_cast<size_t>(m));
    g.check_degree.assign(static_cast<size_t>(m), 0);

    std::vector<int> candidates;
    for (int v = 0; v < n; ++v) {
        for (int e = 0; e < var_degree; ++e) {
            candidates.clear();
            if (e == 0 && g.var_checks[static_cast<size_t>(v)].empty()) {
                // First edge: any minimal-degree check.
                for (int c = 0; c < m; ++c) candidates.push_back(c);
            } else {
                const auto dist = check_distances(g, v);
                int far = -2;  // prefer unreachable (-1 treated as infinity)
                for (int c = 0; c < m; ++c) {
                    const int d = dist[static_cast<size_t>(c)] < 0 ? INT32_MAX : dist[static_cast<size_t>(c)];
                    if (d > far) far = d;
                }
                for (int c = 0; c < m; ++c) {
                    const int d = dist[static_cast<size_t>(c)] < 0 ? INT32_MAX : dist[static_cast<size_t>(c)];
                    if (d == far) candidates.push_back(c);
                }
            }
            // Minimal degree among candidates, random tie-break.
            int best_deg = INT32_MAX;
            for (int c : candidates) best_deg = std::min(best_deg, g.check_degree[static_cast<size_t>(c)]);
            std::vector<int> mins;
            for (int c : candidates)
                if (g.check_degree[static_cast<size_t>(c)] == best_deg) mins.push_back(c);
            const int pick = mins[static_cast<size_t>(rng.bounded(mins.size()))];
            g.var_checks[static_cast<size_t>(v)].push_back(pick);
            g.check_vars[static_cast<size_t>(pick)].push_back(v);
            g.check_degree[static_cast<size_t>(pick)]++;
        }
    }
    return g;
}

pncsim::AlistMatrix to_alist(const Graph& g) {
    pncsim::AlistMatrix a;
    a.n = g.n;
    a.m = g.m;
    a.col_rows = g.var_checks;
    a.row_cols = g.check_vars;
    for (auto& c : a.col_rows) std::sort(c.begin(), c.end());
    for (auto& r : a.row_cols) std::sort(r.begin(), r.end());
    return a;
}

// Permute columns so information positions land on the codeword prefix.
pncsim::AlistMatrix prefix_systematic(const pncsim::AlistMatrix& a, const std::string& tag) {
    const auto code = pncsim::LdpcCode::from_alist(a, tag);
    if (code.systematic_prefix && !code.rank_deficient) return a;
    std::vector<int> order;  // new column order: info positions first
    order.reserve(static_cast<size_t>(a.n));
    std::vector<char> is_info(static_cast<size_t>(a.n), 0);
    for (int c : code.info_positions) is_info[static_cast<size_t>(c)] = 1;
    for (int c = 0; c < a.n; ++c)
        if (is_info[static_cast<size_t>(c)]) order.push_back(c);
    for (int c = 0; c < a.n; ++c)
        if (!is_info[static_cast<size_t>(c)]) order.push_back(c);
    pncsim::AlistMatrix b;
    b.n = a.n;
    b.m = a.m;
    b.col_rows.resize(static_cast<size_t>(a.n));
    std::vector<int> new_pos(static_cast<size_t>(a.n));
    for (int i = 0; i < a.n; ++i) new_pos[static_cast<size_t>(order[static_cast<size_t>(i)])] = i;
    for (int i = 0; i < a.n; ++i) b.col_rows[static_cast<size_t>(i)] = a.col_rows[static_cast<size_t>(order[static_cast<size_t>(i)])];
    b.row_cols.resize(static_cast<size_t>(a.m));
    for (int r = 0; r < a.m; ++r) {
        for (int c : a.row_cols[static_cast<size_t>(r)]) b.row_cols[static_cast<size_t>(r)].push_back(new_pos[static_cast<size_t>(c)]);
        std::sort(b.row_cols[static_cast<size_t>(r)].begin(), b.row_cols[static_cast<size_t>(r)].end());
    }
    return b;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PEG LDPC parity-check matrix generator (alist output)"};
    int n = 1980, m = 990, var_degree = 3;
    uint64_t seed = 7;
    std::string out;
    app.add_option("--n", n, "codeword length")->required();
    app.add_option("--m", m, "number of parity checks")->required();
    app.add_option("--var-degree", var_degree, "variable node degree");
    app.add_option("--seed", seed, "tie-break seed");
    app.add_option("--out", out, "output alist path")->required();
    CLI11_PARSE(app, argc, argv);

    if (n <= 0 || m <= 0 || m >= n || var_degree < 2 || var_degree > m) {
        std::cerr << "genldpc: bad dimensions\n";
        return 1;
    }

    for (uint64_t attempt = 0; attempt < 32; ++attempt) {
        pncsim::Rng rng(pncsim::derive_seed(seed, attempt));
        const Graph g = peg_construct(n, m, var_degree, rng);
        pncsim::AlistMatrix a = prefix_systematic(to_alist(g), out);
        const auto code = pncsim::LdpcCode::from_alist(a, out);
        if (code.rank_deficient) {
            std::cerr << "genldpc: attempt " << attempt << " rank deficient, retrying\n";
            continue;
        }
        if (!code.systematic_prefix) {
            std::cerr << "genldpc: attempt " << attempt << " not prefix-systematic, retrying\n";
            continue;
        }
        pncsim::write_alist(out, a);
        std::cout << "wrote " << out << ": n=" << code.n << " k=" << code.k
                  << " rate=" << code.rate() << "\n";
        return 0;
    }
    std::cerr << "genldpc: failed to construct a full-rank matrix\n";
    return 1;
}
