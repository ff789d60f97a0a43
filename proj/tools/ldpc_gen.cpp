// Generates the progressive-edge-growth parity-check matrices shipped under
// data/ldpc/. Usage: ldpc_gen <n> <m> <var_degree> <seed> <out.alist>
// Retries successive seeds until the parity matrix has full row rank (the
// encoder requires it) and prints the seed that was accepted.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "crosslink/ldpc.hpp"

int main(int argc, char** argv) {
    if (argc != 6) {
        std::fprintf(stderr, "usage: %s <n> <m> <var_degree> <seed> <out.alist>\n", argv[0]);
        return 2;
    }
    const int n = std::atoi(argv[1]);
    const int m = std::atoi(argv[2]);
    const int var_degree = std::atoi(argv[3]);
    std::uint64_t seed = std::strtoull(argv[4], nullptr, 10);
    const std::string out = argv[5];

    for (int attempt = 0; attempt < 64; ++attempt, ++seed) {
        try {
            const crosslink::LdpcCode code = crosslink::ldpc_peg(n, m, var_degree, seed);
            crosslink::ldpc_to_alist(code, out);
            std::printf("wrote %s: n=%d m=%d rate=%.4f edges=%d seed=%llu\n", out.c_str(), code.n,
                        code.m, code.rate(), code.edge_count(),
                        static_cast<unsigned long long>(seed));
            return 0;
        } catch (const std::runtime_error&) {
            // Rank-deficient draw; try the next seed.
        }
    }
    std::fprintf(stderr, "no full-rank construction found near seed %s\n", argv[4]);
    return 1;
}
