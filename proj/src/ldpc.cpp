#include "crosslink/ldpc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "crosslink/llr.hpp"
#include "crosslink/rng.hpp"

namespace crosslink {

namespace {

void validate_graph(const LdpcCode& code) {
    if (code.n <= 0 || code.m <= 0 || code.m >= code.n)
        throw std::invalid_argument("LdpcCode: need 0 < m < n");
    if (static_cast<int>(code.check_neighbors.size()) != code.m ||
        static_cast<int>(code.var_neighbors.size()) != code.n)
        throw std::invalid_argument("LdpcCode: neighbor table sizes disagree with n, m");
}

}  // namespace

int LdpcCode::edge_count() const {
    int e = 0;
    for (const auto& row : check_neighbors) e += static_cast<int>(row.size());
    return e;
}

void LdpcCode::prepare_encoder() {
    validate_graph(*this);
    const std::size_t words = static_cast<std::size_t>((n + 63) / 64);
    std::vector<std::uint64_t> rows(static_cast<std::size_t>(m) * words, 0);
    auto row_bit = [&rows, words](int r, int c) -> std::uint64_t& {
        return rows[static_cast<std::size_t>(r) * words + static_cast<std::size_t>(c) / 64];
    };
    for (int r = 0; r < m; ++r)
        for (int c : check_neighbors[static_cast<std::size_t>(r)])
            row_bit(r, c) ^= std::uint64_t(1) << (c % 64);

    auto test_bit = [&rows, words](int r, int c) {
        return (rows[static_cast<std::size_t>(r) * words + static_cast<std::size_t>(c) / 64] >>
                (c % 64)) & 1;
    };
    auto xor_rows = [&rows, words](int dst, int src) {
        for (std::size_t w = 0; w < words; ++w)
            rows[static_cast<std::size_t>(dst) * words + w] ^=
                rows[static_cast<std::size_t>(src) * words + w];
    };

    // Row-reduce to reduced echelon form, recording one pivot column per row.
    std::vector<int> pivot_col(static_cast<std::size_t>(m), -1);
    std::vector<char> col_is_pivot(static_cast<std::size_t>(n), 0);
    int rank = 0;
    for (int c = 0; c < n && rank < m; ++c) {
        int pr = -1;
        for (int r = rank; r < m; ++r)
            if (test_bit(r, c)) {
                pr = r;
                break;
            }
        if (pr < 0) continue;
        if (pr != rank)
            for (std::size_t w = 0; w < words; ++w)
                std::swap(rows[static_cast<std::size_t>(pr) * words + w],
                          rows[static_cast<std::size_t>(rank) * words + w]);
        for (int r = 0; r < m; ++r)
            if (r != rank && test_bit(r, c)) xor_rows(r, rank);
        pivot_col[static_cast<std::size_t>(rank)] = c;
        col_is_pivot[static_cast<std::size_t>(c)] = 1;
        ++rank;
    }
    if (rank < m) throw std::runtime_error("LdpcCode: parity matrix is row-rank deficient");

    info_positions.clear();
    for (int c = 0; c < n; ++c)
        if (!col_is_pivot[static_cast<std::size_t>(c)]) info_positions.push_back(c);
    parity_positions.assign(pivot_col.begin(), pivot_col.end());

    // Compress each reduced row onto the info columns: parity bit j is the
    // XOR of the info bits its row selects.
    dep_words = static_cast<std::size_t>((k() + 63) / 64);
    parity_deps.assign(static_cast<std::size_t>(m) * dep_words, 0);
    for (int r = 0; r < m; ++r)
        for (std::size_t i = 0; i < info_positions.size(); ++i)
            if (test_bit(r, info_positions[i]))
                parity_deps[static_cast<std::size_t>(r) * dep_words + i / 64] ^=
                    std::uint64_t(1) << (i % 64);
}

bool LdpcCode::parity_holds(const std::vector<std::uint8_t>& codeword) const {
    if (static_cast<int>(codeword.size()) != n) return false;
    for (const auto& row : check_neighbors) {
        int acc = 0;
        for (int c : row) acc ^= codeword[static_cast<std::size_t>(c)];
        if (acc) return false;
    }
    return true;
}

LdpcCode ldpc_from_alist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ldpc_from_alist: cannot open " + path);

    LdpcCode code;
    int max_var_deg = 0, max_check_deg = 0;
    if (!(in >> code.n >> code.m >> max_var_deg >> max_check_deg))
        throw std::runtime_error("ldpc_from_alist: malformed header in " + path);
    if (code.n <= 0 || code.m <= 0)
        throw std::runtime_error("ldpc_from_alist: non-positive dimensions in " + path);

    std::vector<int> var_deg(static_cast<std::size_t>(code.n));
    std::vector<int> check_deg(static_cast<std::size_t>(code.m));
    for (int& d : var_deg)
        if (!(in >> d)) throw std::runtime_error("ldpc_from_alist: truncated degrees");
    for (int& d : check_deg)
        if (!(in >> d)) throw std::runtime_error("ldpc_from_alist: truncated degrees");

    code.var_neighbors.assign(static_cast<std::size_t>(code.n), {});
    code.check_neighbors.assign(static_cast<std::size_t>(code.m), {});
    for (int v = 0; v < code.n; ++v) {
        // Padded writers emit max_var_deg entries per variable with zero fill.
        for (int j = 0; j < max_var_deg; ++j) {
            int idx = 0;
            if (j < var_deg[static_cast<std::size_t>(v)]) {
                if (!(in >> idx)) throw std::runtime_error("ldpc_from_alist: truncated columns");
                if (idx < 1 || idx > code.m)
                    throw std::runtime_error("ldpc_from_alist: check index out of range");
                code.var_neighbors[static_cast<std::size_t>(v)].push_back(idx - 1);
            } else {
                std::streampos mark = in.tellg();
                if (in >> idx) {
                    if (idx != 0) in.seekg(mark);  // unpadded writer: value belongs ahead
                } else {
                    in.clear();
                    break;
                }
            }
        }
    }
    for (int c = 0; c < code.m; ++c) {
        for (int j = 0; j < max_check_deg; ++j) {
            int idx = 0;
            if (j < check_deg[static_cast<std::size_t>(c)]) {
                if (!(in >> idx)) throw std::runtime_error("ldpc_from_alist: truncated rows");
                if (idx < 1 || idx > code.n)
                    throw std::runtime_error("ldpc_from_alist: variable index out of range");
                code.check_neighbors[static_cast<std::size_t>(c)].push_back(idx - 1);
            } else {
                std::streampos mark = in.tellg();
                if (in >> idx) {
                    if (idx != 0) in.seekg(mark);
                } else {
                    in.clear();
                    break;
                }
            }
        }
    }

    // Cross-check the two adjacency views.
    std::vector<std::vector<int>> rebuilt(static_cast<std::size_t>(code.n));
    for (int c = 0; c < code.m; ++c)
        for (int v : code.check_neighbors[static_cast<std::size_t>(c)])
            rebuilt[static_cast<std::size_t>(v)].push_back(c);
    for (int v = 0; v < code.n; ++v) {
        auto a = code.var_neighbors[static_cast<std::size_t>(v)];
        auto b = rebuilt[static_cast<std::size_t>(v)];
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a != b) throw std::runtime_error("ldpc_from_alist: inconsistent adjacency in " + path);
    }

    code.prepare_encoder();
    return code;
}

void ldpc_to_alist(const LdpcCode& code, const std::string& path) {
    validate_graph(code);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("ldpc_to_alist: cannot open " + path);

    std::size_t max_var_deg = 0, max_check_deg = 0;
    for (const auto& row : code.var_neighbors) max_var_deg = std::max(max_var_deg, row.size());
    for (const auto& row : code.check_neighbors) max_check_deg = std::max(max_check_deg, row.size());

    out << code.n << ' ' << code.m << '\n';
    out << max_var_deg << ' ' << max_check_deg << '\n';
    for (int v = 0; v < code.n; ++v)
        out << code.var_neighbors[static_cast<std::size_t>(v)].size()
            << (v + 1 < code.n ? ' ' : '\n');
    for (int c = 0; c < code.m; ++c)
        out << code.check_neighbors[static_cast<std::size_t>(c)].size()
            << (c + 1 < code.m ? ' ' : '\n');
    for (const auto& row : code.var_neighbors) {
        for (std::size_t j = 0; j < max_var_deg; ++j)
            out << (j < row.size() ? row[j] + 1 : 0) << (j + 1 < max_var_deg ? ' ' : '\n');
    }
    for (const auto& row : code.check_neighbors) {
        for (std::size_t j = 0; j < max_check_deg; ++j)
            out << (j < row.size() ? row[j] + 1 : 0) << (j + 1 < max_check_deg ? ' ' : '\n');
    }
    if (!out) throw std::runtime_error("ldpc_to_alist: write failed for " + path);
}

LdpcCode ldpc_peg(int n, int m, int var_degree, std::uint64_t seed) {
    if (n <= 0 || m <= 0 || m >= n)
        throw std::invalid_argument("ldpc_peg: need 0 < m < n");
    if (var_degree < 2 || var_degree > m)
        throw std::invalid_argument("ldpc_peg: variable degree must lie in [2, m]");

    Rng rng = Rng::stream(seed, 0x706567);
    LdpcCode code;
    code.n = n;
    code.m = m;
    code.var_neighbors.assign(static_cast<std::size_t>(n), {});
    code.check_neighbors.assign(static_cast<std::size_t>(m), {});
    std::vector<int> check_deg(static_cast<std::size_t>(m), 0);

    std::vector<char> reached(static_cast<std::size_t>(m));
    std::vector<char> var_seen(static_cast<std::size_t>(n));
    std::vector<int> frontier, next_frontier, last_growth;

    auto pick = [&](const std::vector<int>& candidates) {
        int best_deg = check_deg[static_cast<std::size_t>(candidates.front())];
        for (int c : candidates) best_deg = std::min(best_deg, check_deg[static_cast<std::size_t>(c)]);
        std::vector<int> ties;
        for (int c : candidates)
            if (check_deg[static_cast<std::size_t>(c)] == best_deg) ties.push_back(c);
        return ties[static_cast<std::size_t>(rng.below(ties.size()))];
    };

    for (int v = 0; v < n; ++v) {
        for (int e = 0; e < var_degree; ++e) {
            int chosen;
            if (e == 0) {
                // First edge: global minimum-degree check.
                std::vector<int> all(static_cast<std::size_t>(m));
                for (int c = 0; c < m; ++c) all[static_cast<std::size_t>(c)] = c;
                chosen = pick(all);
            } else {
                // Grow the BFS tree rooted at v until the reachable check set
                // stops expanding; connect outside it (or to its deepest ring).
                std::fill(reached.begin(), reached.end(), 0);
                std::fill(var_seen.begin(), var_seen.end(), 0);
                var_seen[static_cast<std::size_t>(v)] = 1;
                frontier.clear();
                int n_reached = 0;
                for (int c : code.var_neighbors[static_cast<std::size_t>(v)]) {
                    if (!reached[static_cast<std::size_t>(c)]) {
                        reached[static_cast<std::size_t>(c)] = 1;
                        frontier.push_back(c);
                        ++n_reached;
                    }
                }
                last_growth = frontier;
                while (!frontier.empty() && n_reached < m) {
                    next_frontier.clear();
                    for (int c : frontier)
                        for (int u : code.check_neighbors[static_cast<std::size_t>(c)]) {
                            if (var_seen[static_cast<std::size_t>(u)]) continue;
                            var_seen[static_cast<std::size_t>(u)] = 1;
                            for (int c2 : code.var_neighbors[static_cast<std::size_t>(u)])
                                if (!reached[static_cast<std::size_t>(c2)]) {
                                    reached[static_cast<std::size_t>(c2)] = 1;
                                    next_frontier.push_back(c2);
                                    ++n_reached;
                                }
                        }
                    if (next_frontier.empty()) break;
                    last_growth = next_frontier;
                    frontier.swap(next_frontier);
                }
                std::vector<int> candidates;
                if (n_reached < m) {
                    for (int c = 0; c < m; ++c)
                        if (!reached[static_cast<std::size_t>(c)]) candidates.push_back(c);
                } else {
                    candidates = last_growth;  // girth-maximizing fallback
                }
                chosen = pick(candidates);
            }
            code.var_neighbors[static_cast<std::size_t>(v)].push_back(chosen);
            code.check_neighbors[static_cast<std::size_t>(chosen)].push_back(v);
            ++check_deg[static_cast<std::size_t>(chosen)];
        }
        std::sort(code.var_neighbors[static_cast<std::size_t>(v)].begin(),
                  code.var_neighbors[static_cast<std::size_t>(v)].end());
    }
    for (auto& row : code.check_neighbors) std::sort(row.begin(), row.end());

    code.prepare_encoder();
    return code;
}

std::vector<std::uint8_t> ldpc_encode(const LdpcCode& code, const std::vector<std::uint8_t>& info) {
    if (static_cast<int>(info.size()) != code.k())
        throw std::invalid_argument("ldpc_encode: info length must equal k");
    if (code.parity_deps.empty())
        throw std::runtime_error("ldpc_encode: encoder not prepared");

    std::vector<std::uint64_t> packed(code.dep_words, 0);
    for (std::size_t i = 0; i < info.size(); ++i) {
        if (info[i] > 1) throw std::invalid_argument("ldpc_encode: bits must be 0 or 1");
        if (info[i]) packed[i / 64] ^= std::uint64_t(1) << (i % 64);
    }

    std::vector<std::uint8_t> cw(static_cast<std::size_t>(code.n), 0);
    for (std::size_t i = 0; i < info.size(); ++i)
        cw[static_cast<std::size_t>(code.info_positions[i])] = info[i];
    for (int r = 0; r < code.m; ++r) {
        int parity = 0;
        for (std::size_t w = 0; w < code.dep_words; ++w)
            parity ^= static_cast<int>(
                __builtin_popcountll(code.parity_deps[static_cast<std::size_t>(r) * code.dep_words + w] &
                                     packed[w]) & 1);
        cw[static_cast<std::size_t>(code.parity_positions[static_cast<std::size_t>(r)])] =
            static_cast<std::uint8_t>(parity);
    }
    return cw;
}

LdpcDecodeResult ldpc_decode(const LdpcCode& code, const std::vector<double>& llrs,
                             int max_iterations, double normalization) {
    if (static_cast<int>(llrs.size()) != code.n)
        throw std::invalid_argument("ldpc_decode: llr length must equal n");
    if (max_iterations < 1) throw std::invalid_argument("ldpc_decode: need at least 1 iteration");
    if (normalization <= 0.0 || normalization > 1.0)
        throw std::invalid_argument("ldpc_decode: normalization must lie in (0, 1]");

    // CSR edge layout over checks.
    const int n_edges = code.edge_count();
    std::vector<int> check_off(static_cast<std::size_t>(code.m) + 1, 0);
    std::vector<int> edge_var(static_cast<std::size_t>(n_edges));
    {
        int e = 0;
        for (int c = 0; c < code.m; ++c) {
            check_off[static_cast<std::size_t>(c)] = e;
            for (int v : code.check_neighbors[static_cast<std::size_t>(c)])
                edge_var[static_cast<std::size_t>(e++)] = v;
        }
        check_off[static_cast<std::size_t>(code.m)] = e;
    }
    std::vector<std::vector<int>> var_edges(static_cast<std::size_t>(code.n));
    for (int e = 0; e < n_edges; ++e)
        var_edges[static_cast<std::size_t>(edge_var[static_cast<std::size_t>(e)])].push_back(e);

    std::vector<double> v2c(static_cast<std::size_t>(n_edges));
    std::vector<double> c2v(static_cast<std::size_t>(n_edges), 0.0);
    for (int e = 0; e < n_edges; ++e)
        v2c[static_cast<std::size_t>(e)] = clip_llr(llrs[static_cast<std::size_t>(edge_var[static_cast<std::size_t>(e)])]);

    LdpcDecodeResult res;
    res.codeword.assign(static_cast<std::size_t>(code.n), 0);
    for (int iter = 1; iter <= max_iterations; ++iter) {
        // Check update: normalized min-sum with self-excluded minimum.
        for (int c = 0; c < code.m; ++c) {
            const int lo = check_off[static_cast<std::size_t>(c)];
            const int hi = check_off[static_cast<std::size_t>(c) + 1];
            double min1 = 1e300, min2 = 1e300;
            int arg_min = -1;
            int sign_prod = 1;
            for (int e = lo; e < hi; ++e) {
                const double v = v2c[static_cast<std::size_t>(e)];
                const double a = std::fabs(v);
                if (v < 0.0) sign_prod = -sign_prod;
                if (a < min1) {
                    min2 = min1;
                    min1 = a;
                    arg_min = e;
                } else if (a < min2) {
                    min2 = a;
                }
            }
            for (int e = lo; e < hi; ++e) {
                const double v = v2c[static_cast<std::size_t>(e)];
                const int self_sign = v < 0.0 ? -1 : 1;
                const double mag = (e == arg_min) ? min2 : min1;
                c2v[static_cast<std::size_t>(e)] =
                    normalization * static_cast<double>(sign_prod * self_sign) * mag;
            }
        }
        // Variable update and posterior.
        bool ambiguous = false;
        for (int v = 0; v < code.n; ++v) {
            double total = llrs[static_cast<std::size_t>(v)];
            for (int e : var_edges[static_cast<std::size_t>(v)])
                total += c2v[static_cast<std::size_t>(e)];
            for (int e : var_edges[static_cast<std::size_t>(v)])
                v2c[static_cast<std::size_t>(e)] = clip_llr(total - c2v[static_cast<std::size_t>(e)]);
            if (total == 0.0) ambiguous = true;
            res.codeword[static_cast<std::size_t>(v)] = total < 0.0 ? 1 : 0;
        }
        res.iterations = iter;
        if (!ambiguous && code.parity_holds(res.codeword)) {
            res.converged = true;
            break;
        }
    }

    res.info_bits.resize(static_cast<std::size_t>(code.k()));
    for (std::size_t i = 0; i < res.info_bits.size(); ++i)
        res.info_bits[i] = res.codeword[static_cast<std::size_t>(code.info_positions[i])];
    return res;
}

}  // namespace crosslink
