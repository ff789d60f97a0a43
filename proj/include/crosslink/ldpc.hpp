#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace crosslink {

// Binary LDPC code given by its parity-check graph, with systematic encoding
// data derived once at load time via GF(2) elimination.
struct LdpcCode {
    int n = 0;  // codeword length
    int m = 0;  // parity checks
    std::vector<std::vector<int>> check_neighbors;  // per check: variable indices
    std::vector<std::vector<int>> var_neighbors;    // per variable: check indices

    // Filled by prepare_encoder(): info bits occupy info_positions in the
    // codeword, row j of parity_deps selects the info bits XORed into the
    // parity bit at parity_positions[j].
    std::vector<int> info_positions;
    std::vector<int> parity_positions;
    std::vector<std::uint64_t> parity_deps;  // m rows of ceil(k/64) words
    std::size_t dep_words = 0;

    int k() const { return n - m; }
    double rate() const { return static_cast<double>(k()) / static_cast<double>(n); }
    int edge_count() const;
    // Row-reduces the parity matrix to derive systematic positions; throws
    // std::runtime_error when it is row-rank deficient.
    void prepare_encoder();
    bool parity_holds(const std::vector<std::uint8_t>& codeword) const;
};

// MacKay "alist" text format (1-based indices, zero padding tolerated).
LdpcCode ldpc_from_alist(const std::string& path);
void ldpc_to_alist(const LdpcCode& code, const std::string& path);

// Progressive-edge-growth construction with uniform variable degree: each new
// edge attaches to a check outside (or at the far edge of) the variable's
// current BFS neighborhood, breaking ties by lowest degree and then by a
// seeded draw. Deterministic per seed; the result has prepare_encoder() run.
LdpcCode ldpc_peg(int n, int m, int var_degree, std::uint64_t seed);

// Systematic encode: info bits appear verbatim at info_positions.
std::vector<std::uint8_t> ldpc_encode(const LdpcCode& code,
                                      const std::vector<std::uint8_t>& info);

struct LdpcDecodeResult {
    std::vector<std::uint8_t> info_bits;
    std::vector<std::uint8_t> codeword;
    bool converged = false;
    int iterations = 0;
};

// Flooding normalized min-sum (factor 0.8, messages clipped to the shared
// LLR magnitude). Positive input LLR means bit 0. Convergence requires a
// zero syndrome with every posterior strictly nonzero, so all-zero input
// never converges; the syndrome is checked after each iteration.
LdpcDecodeResult ldpc_decode(const LdpcCode& code, const std::vector<double>& llrs,
                             int max_iterations = 25, double normalization = 0.8);

}  // namespace crosslink
