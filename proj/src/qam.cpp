#include "crosslink/qam.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "crosslink/llr.hpp"

namespace crosslink {

namespace {

// Binary-reflected Gray decode: label -> rank along the axis.
int gray_to_index(int g) {
    int b = 0;
    for (; g; g >>= 1) b ^= g;
    return b;
}

}  // namespace

double QamConstellation::min_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            best = std::min(best, std::abs(points[i] - points[j]));
    return best;
}

double QamConstellation::average_power() const {
    double s = 0.0;
    for (const cd& p : points) s += std::norm(p);
    return s / static_cast<double>(points.size());
}

QamConstellation make_qam(int bits_per_symbol) {
    if (bits_per_symbol != 2 && bits_per_symbol != 4 && bits_per_symbol != 6 &&
        bits_per_symbol != 8)
        throw std::invalid_argument("make_qam: bits_per_symbol must be 2, 4, 6, or 8");

    const int k = bits_per_symbol / 2;       // bits per axis
    const int levels = 1 << k;               // amplitudes per axis
    // Average power of {+-1, +-3, ..., +-(levels-1)} is (levels^2 - 1) / 3 per
    // axis; two axes give the symbol power.
    const double scale =
        1.0 / std::sqrt(2.0 * (static_cast<double>(levels) * levels - 1.0) / 3.0);

    // Rank 0 (Gray label 0) is the most positive amplitude.
    std::vector<double> amp(static_cast<std::size_t>(levels));
    for (int g = 0; g < levels; ++g)
        amp[static_cast<std::size_t>(g)] =
            static_cast<double>(levels - 1 - 2 * gray_to_index(g)) * scale;

    QamConstellation c;
    c.bits_per_symbol = bits_per_symbol;
    c.points.resize(std::size_t(1) << bits_per_symbol);
    for (int label = 0; label < (1 << bits_per_symbol); ++label) {
        const int gi = label >> k;              // first half of the bits
        const int gq = label & (levels - 1);    // second half
        c.points[static_cast<std::size_t>(label)] =
            cd(amp[static_cast<std::size_t>(gi)], amp[static_cast<std::size_t>(gq)]);
    }
    return c;
}

std::vector<cd> qam_modulate(const QamConstellation& c, const std::vector<std::uint8_t>& bits) {
    const int m = c.bits_per_symbol;
    if (m <= 0) throw std::invalid_argument("qam_modulate: uninitialized constellation");
    if (bits.size() % static_cast<std::size_t>(m) != 0)
        throw std::invalid_argument("qam_modulate: bit count not a multiple of bits_per_symbol");

    std::vector<cd> out(bits.size() / static_cast<std::size_t>(m));
    for (std::size_t s = 0; s < out.size(); ++s) {
        int label = 0;
        for (int b = 0; b < m; ++b) {
            const std::uint8_t bit = bits[s * static_cast<std::size_t>(m) + static_cast<std::size_t>(b)];
            if (bit > 1) throw std::invalid_argument("qam_modulate: bits must be 0 or 1");
            label = (label << 1) | bit;
        }
        out[s] = c.points[static_cast<std::size_t>(label)];
    }
    return out;
}

void qam_demodulate_maxlog(const QamConstellation& c, cd y, double gain, double sigma2,
                           double* llr_out) {
    const int m = c.bits_per_symbol;
    if (sigma2 <= 0.0) throw std::invalid_argument("qam_demodulate_maxlog: sigma2 must be > 0");

    // Two running minima per bit position: distance^2 given bit=0 / bit=1.
    constexpr double inf = std::numeric_limits<double>::infinity();
    double min0[8], min1[8];
    for (int b = 0; b < m; ++b) min0[b] = min1[b] = inf;

    const int order = 1 << m;
    for (int label = 0; label < order; ++label) {
        const cd d = y - gain * c.points[static_cast<std::size_t>(label)];
        const double dist = std::norm(d);
        for (int b = 0; b < m; ++b) {
            const bool bit_set = (label >> (m - 1 - b)) & 1;
            double& slot = bit_set ? min1[b] : min0[b];
            if (dist < slot) slot = dist;
        }
    }
    for (int b = 0; b < m; ++b) llr_out[b] = clip_llr((min1[b] - min0[b]) / sigma2);
}

std::vector<double> qam_demodulate_maxlog(const QamConstellation& c, const std::vector<cd>& symbols,
                                          double gain, double sigma2) {
    std::vector<double> llr(symbols.size() * static_cast<std::size_t>(c.bits_per_symbol));
    for (std::size_t s = 0; s < symbols.size(); ++s)
        qam_demodulate_maxlog(c, symbols[s], gain, sigma2,
                              llr.data() + s * static_cast<std::size_t>(c.bits_per_symbol));
    return llr;
}

}  // namespace crosslink
