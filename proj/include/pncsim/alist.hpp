#pragma once

// Reader/writer for sparse parity-check matrices in the alist text format.
//
// Layout (all tokens whitespace-separated, indices 1-based):
//   n m
//   dmax_col dmax_row
//   col_degree_1 .. col_degree_n
//   row_degree_1 .. row_degree_m
//   n column blocks: the row indices checking each column
//   m row blocks: the column indices checked by each row
// Blocks may be zero-padded to dmax (classic layout) or ragged (exactly
// degree entries each); both are accepted, zero entries are ignored.

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pncsim {

struct AlistMatrix {
    int n = 0;  // columns (variable nodes)
    int m = 0;  // rows (check nodes)
    std::vector<std::vector<int>> col_rows;  // per column: 0-based row indices, sorted
    std::vector<std::vector<int>> row_cols;  // per row: 0-based column indices, sorted
};

namespace detail {

inline long take_int(std::istringstream& in, const char* what) {
    long v;
    if (!(in >> v)) throw std::runtime_error(std::string("alist: missing or malformed ") + what);
    return v;
}

}  // namespace detail

inline AlistMatrix parse_alist(const std::string& text) {
    std::istringstream in(text);
    AlistMatrix a;
    const long n = detail::take_int(in, "column count");
    const long m = detail::take_int(in, "row count");
    if (n <= 0 || m <= 0 || n > (1 << 24) || m > (1 << 24))
        throw std::runtime_error("alist: implausible dimensions");
    a.n = static_cast<int>(n);
    a.m = static_cast<int>(m);
    const long dmax_col = detail::take_int(in, "max column degree");
    const long dmax_row = detail::take_int(in, "max row degree");
    if (dmax_col < 0 || dmax_row < 0 || dmax_col > m || dmax_row > n)
        throw std::runtime_error("alist: implausible max degrees");

    std::vector<int> col_deg(a.n), row_deg(a.m);
    long col_deg_sum = 0, row_deg_sum = 0;
    for (auto& d : col_deg) {
        d = static_cast<int>(detail::take_int(in, "column degree"));
        if (d < 0 || d > dmax_col) throw std::runtime_error("alist: column degree out of range");
        col_deg_sum += d;
    }
    for (auto& d : row_deg) {
        d = static_cast<int>(detail::take_int(in, "row degree"));
        if (d < 0 || d > dmax_row) throw std::runtime_error("alist: row degree out of range");
        row_deg_sum += d;
    }
    if (col_deg_sum != row_deg_sum)
        throw std::runtime_error("alist: column and row degree sums disagree");

    // Remaining tokens decide padded vs ragged layout.
    std::vector<long> rest;
    rest.reserve(static_cast<size_t>(col_deg_sum + row_deg_sum));
    long v;
    while (in >> v) rest.push_back(v);
    const long padded = dmax_col * a.n + dmax_row * a.m;
    const long ragged = col_deg_sum + row_deg_sum;
    bool is_padded;
    if (static_cast<long>(rest.size()) == padded) is_padded = true;
    else if (static_cast<long>(rest.size()) == ragged) is_padded = false;
    else throw std::runtime_error("alist: entry count matches neither padded nor ragged layout");

    size_t pos = 0;
    auto read_block = [&](int degree, long dmax, long limit, const char* what) {
        std::vector<int> out;
        out.reserve(static_cast<size_t>(degree));
        const long count = is_padded ? dmax : degree;
        for (long t = 0; t < count; ++t) {
            const long e = rest[pos++];
            if (e == 0) continue;  // padding
            if (e < 1 || e > limit)
                throw std::runtime_error(std::string("alist: ") + what + " index out of range");
            out.push_back(static_cast<int>(e - 1));
        }
        if (static_cast<int>(out.size()) != degree)
            throw std::runtime_error(std::string("alist: ") + what + " entries inconsistent with declared degree");
        std::sort(out.begin(), out.end());
        if (std::adjacent_find(out.begin(), out.end()) != out.end())
            throw std::runtime_error(std::string("alist: duplicate ") + what + " entry");
        return out;
    };

    a.col_rows.reserve(static_cast<size_t>(a.n));
    for (int c = 0; c < a.n; ++c) a.col_rows.push_back(read_block(col_deg[static_cast<size_t>(c)], dmax_col, a.m, "row"));
    a.row_cols.reserve(static_cast<size_t>(a.m));
    for (int r = 0; r < a.m; ++r) a.row_cols.push_back(read_block(row_deg[static_cast<size_t>(r)], dmax_row, a.n, "column"));

    // Cross-check: both adjacency lists must describe the same matrix.
    std::vector<std::vector<int>> from_cols(static_cast<size_t>(a.m));
    for (int c = 0; c < a.n; ++c)
        for (int r : a.col_rows[static_cast<size_t>(c)]) from_cols[static_cast<size_t>(r)].push_back(c);
    for (int r = 0; r < a.m; ++r) {
        if (from_cols[static_cast<size_t>(r)] != a.row_cols[static_cast<size_t>(r)])
            throw std::runtime_error("alist: row and column adjacency lists disagree");
    }
    return a;
}

inline AlistMatrix read_alist(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("alist: cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_alist(buf.str());
}

inline std::string format_alist(const AlistMatrix& a) {
    size_t dmax_col = 0, dmax_row = 0;
    for (const auto& c : a.col_rows) dmax_col = std::max(dmax_col, c.size());
    for (const auto& r : a.row_cols) dmax_row = std::max(dmax_row, r.size());
    std::ostringstream out;
    out << a.n << ' ' << a.m << '\n' << dmax_col << ' ' << dmax_row << '\n';
    for (int c = 0; c < a.n; ++c) out << a.col_rows[static_cast<size_t>(c)].size() << (c + 1 < a.n ? ' ' : '\n');
    for (int r = 0; r < a.m; ++r) out << a.row_cols[static_cast<size_t>(r)].size() << (r + 1 < a.m ? ' ' : '\n');
    auto write_block = [&](const std::vector<int>& idx, size_t dmax) {
        for (size_t t = 0; t < dmax; ++t) {
            if (t) out << ' ';
            out << (t < idx.size() ? idx[t] + 1 : 0);
        }
        out << '\n';
    };
    for (const auto& c : a.col_rows) write_block(c, dmax_col);
    for (const auto& r : a.row_cols) write_block(r, dmax_row);
    return out.str();
}

inline void write_alist(const std::string& path, const AlistMatrix& a) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("alist: cannot write " + path);
    f << format_alist(a);
}

}  // namespace pncsim
