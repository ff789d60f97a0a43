#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace crosslink {

using cd = std::complex<double>;

// Square Gray-mapped QAM with unit average symbol power. Supported orders:
// 2 bits (QPSK), 4 (16QAM), 6 (64QAM), 8 (256QAM).
//
// Bit convention: a symbol's label is read MSB-first; the first half of the
// bits selects the in-phase level, the second half the quadrature level.
// Per-axis labels are binary-reflected Gray codes with the all-zero label on
// the most positive amplitude, so QPSK bits 00 map to (1+j)/sqrt(2) and
// adjacent constellation points differ in exactly one bit.
struct QamConstellation {
    int bits_per_symbol = 0;
    // Indexed by the integer value of the MSB-first bit label.
    std::vector<cd> points;

    int order() const { return static_cast<int>(points.size()); }
    // Smallest pairwise distance, enumerated.
    double min_distance() const;
    // Average symbol power, enumerated (1 by construction).
    double average_power() const;
};

QamConstellation make_qam(int bits_per_symbol);

// bits.size() must be a multiple of bits_per_symbol.
std::vector<cd> qam_modulate(const QamConstellation& c, const std::vector<std::uint8_t>& bits);

// Max-log per-bit LLRs for an observation y ~ gain * s + CN(0, sigma2):
//   llr_i = ( min_{s: bit_i=1} |y - gain*s|^2 - min_{s: bit_i=0} |y - gain*s|^2 ) / sigma2
// Positive means bit 0. Output clipped to +-kLlrClip. Writes bits_per_symbol
// values to llr_out.
void qam_demodulate_maxlog(const QamConstellation& c, cd y, double gain, double sigma2,
                           double* llr_out);

// Convenience wrapper over a symbol vector; returns symbols.size()*bits_per_symbol LLRs.
std::vector<double> qam_demodulate_maxlog(const QamConstellation& c, const std::vector<cd>& symbols,
                                          double gain, double sigma2);

}  // namespace crosslink
