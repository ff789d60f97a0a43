#include "crosslink/csi.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace crosslink {

CsiMatrix extract_csi(const ChannelRealization& h, int n_layers,
                      std::vector<double>* eigenvalues_out) {
    const Numerology& num = h.num;
    num.validate();
    if (n_layers <= 0 || n_layers > std::min(num.n_tx, num.n_rx))
        throw std::invalid_argument("extract_csi: n_layers must lie in [1, min(n_tx, n_rx)]");

    CsiMatrix w;
    w.n_subbands = num.n_subbands;
    w.n_tx = num.n_tx;
    w.n_layers = n_layers;
    w.w.resize(static_cast<std::size_t>(num.n_subbands) * w.row_len());
    if (eigenvalues_out)
        eigenvalues_out->assign(
            static_cast<std::size_t>(num.n_subbands) * static_cast<std::size_t>(n_layers), 0.0);

    const int width = num.subband_width();
    for (int k = 0; k < num.n_subbands; ++k) {
        // Covariance averaged over the subband's REs; the realization is
        // symbol-invariant, so the time average reduces to the frequency one.
        CMatrix r(num.n_tx, num.n_tx);
        for (int f = k * width; f < (k + 1) * width; ++f) {
            const CMatrix hf = h.matrix_at(f);
            r += hf.adjoint_times(hf);
        }
        const double inv = 1.0 / static_cast<double>(width);
        for (cd& v : r.a) v *= inv;

        std::vector<double> values;
        CMatrix vectors;
        hermitian_eig(r, values, vectors);
        for (int l = 0; l < n_layers; ++l) {
            for (int t = 0; t < num.n_tx; ++t) w.at(k, l, t) = vectors.at(t, l);
            if (eigenvalues_out)
                (*eigenvalues_out)[static_cast<std::size_t>(k) * static_cast<std::size_t>(n_layers) +
                                   static_cast<std::size_t>(l)] = values[static_cast<std::size_t>(l)];
        }
    }
    return w;
}

double sgcs(const CsiMatrix& w, const Precoder& p) {
    if (w.n_subbands != p.n_subbands())
        throw std::invalid_argument("sgcs: subband count mismatch");
    if (w.n_subbands == 0) throw std::invalid_argument("sgcs: empty CsiMatrix");

    double acc = 0.0;
    for (int k = 0; k < w.n_subbands; ++k) {
        const CMatrix& pm = p.per_subband[static_cast<std::size_t>(k)];
        if (pm.rows != w.n_tx || pm.cols != w.n_layers)
            throw std::invalid_argument("sgcs: precoder shape mismatch");
        cd dot = 0.0;
        double wn = 0.0, pn = 0.0;
        for (int l = 0; l < w.n_layers; ++l)
            for (int t = 0; t < w.n_tx; ++t) {
                const cd wv = w.at(k, l, t);
                const cd pv = pm.at(t, l);
                dot += std::conj(wv) * pv;
                wn += std::norm(wv);
                pn += std::norm(pv);
            }
        if (wn <= 0.0 || pn <= 0.0)
            throw std::invalid_argument("sgcs: zero vector in subband");
        acc += std::norm(dot) / (wn * pn);
    }
    return acc / static_cast<double>(w.n_subbands);
}

QuantizedCsi quantized_feedback(const CsiMatrix& w, int bit_budget) {
    const std::size_t n_coeff = static_cast<std::size_t>(w.n_subbands) * w.row_len();
    if (n_coeff == 0) throw std::invalid_argument("quantized_feedback: empty CsiMatrix");
    const int per_coeff = bit_budget / static_cast<int>(n_coeff);
    if (per_coeff < 2)
        throw std::invalid_argument("quantized_feedback: budget below 2 bits per coefficient");

    const int mag_bits = per_coeff / 2;
    const int phase_bits = per_coeff - mag_bits;
    const int mag_levels = (1 << mag_bits) - 1;  // endpoints representable
    const int phase_levels = 1 << phase_bits;
    const double phase_step = 2.0 * std::numbers::pi / static_cast<double>(phase_levels);

    QuantizedCsi out;
    out.bits_per_coefficient = per_coeff;
    out.reconstructed = w;
    out.bits.reserve(n_coeff * static_cast<std::size_t>(per_coeff));

    auto push_index = [&out](int index, int bits) {
        for (int b = bits - 1; b >= 0; --b)
            out.bits.push_back(static_cast<std::uint8_t>((index >> b) & 1));
    };

    for (int k = 0; k < w.n_subbands; ++k) {
        for (int l = 0; l < w.n_layers; ++l) {
            for (int t = 0; t < w.n_tx; ++t) {
                const cd c = w.at(k, l, t);
                // Unit-norm eigenvector coefficients keep |c| <= 1.
                const double mag = std::min(std::abs(c), 1.0);
                const int mi = static_cast<int>(std::lround(mag * mag_levels));
                const double phase = std::arg(c);
                int pi_idx = static_cast<int>(std::lround(phase / phase_step));
                pi_idx = ((pi_idx % phase_levels) + phase_levels) % phase_levels;
                push_index(mi, mag_bits);
                push_index(pi_idx, phase_bits);
                const double rmag = static_cast<double>(mi) / static_cast<double>(mag_levels);
                const double rphase = static_cast<double>(pi_idx) * phase_step;
                out.reconstructed.at(k, l, t) =
                    rmag * cd(std::cos(rphase), std::sin(rphase));
            }
            // Renormalize the reconstructed per-layer vector.
            double norm_sq = 0.0;
            for (int t = 0; t < w.n_tx; ++t) norm_sq += std::norm(out.reconstructed.at(k, l, t));
            if (norm_sq > 0.0) {
                const double inv = 1.0 / std::sqrt(norm_sq);
                for (int t = 0; t < w.n_tx; ++t) out.reconstructed.at(k, l, t) *= inv;
            }
        }
    }
    return out;
}

}  // namespace crosslink
