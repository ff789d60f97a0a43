#pragma once

#include <vector>

#include "crosslink/cmatrix.hpp"
#include "crosslink/qam.hpp"

namespace crosslink {

// Per-layer equalizer output for one resource element.
struct EqualizerOutput {
    std::vector<cd> x_hat;           // equalized layer estimates
    std::vector<double> post_sinr;   // linear post-equalization SINR, finite
    std::vector<double> bias;        // E[x_hat_i | x_i] = bias_i * x_i
    std::vector<double> noise_var;   // residual variance around bias_i * x_i
};

// x_hat = Heq^H (Heq Heq^H + sigma2 I)^-1 y, evaluated through the
// equivalent Gram-side solve (Heq^H Heq + sigma2 I)^-1 Heq^H y. Per-layer
// SINR is 1/E_ii - 1 with E = I - Heq^H (Heq Heq^H + sigma2 I)^-1 Heq;
// E_ii is floored at 1e-12 so the reported SINR stays finite.
// Requires sigma2 > 0, or sigma2 = 0 with full column rank (throws
// std::runtime_error on a singular system).
EqualizerOutput lmmse_equalize(const CMatrix& heq, const std::vector<cd>& y, double sigma2);

// x_hat = (Heq^H Heq)^-1 Heq^H y (pseudo-inverse). Throws std::runtime_error
// when Heq is column-rank deficient. When sigma2 > 0 is supplied the
// post-equalization SNR 1/(sigma2 * [(Heq^H Heq)^-1]_ii) is reported,
// otherwise the floor-capped noiseless value.
EqualizerOutput zf_equalize(const CMatrix& heq, const std::vector<cd>& y, double sigma2 = 0.0);

struct KBestResult {
    std::vector<int> hard_labels;   // per layer, constellation point label
    std::vector<cd> hard_symbols;   // per layer
    std::vector<double> llrs;       // n_layers * bits_per_symbol, max-log over the list
    double best_metric = 0.0;       // |y - Heq s|^2 of the hard decision
};

// Breadth-first sphere search over the QR decomposition of Heq keeping the k
// lowest-metric partial paths per level. All layers share one constellation.
// With k >= order^(n_layers-1) the search is exhaustive and the hard decision
// is the ML solution. List LLRs divide by sigma2 and clip to
// +-kbest_llr_clip when one hypothesis is missing from the list.
KBestResult kbest_detect(const CMatrix& heq, const std::vector<cd>& y,
                         const QamConstellation& c, int k, double sigma2);

inline constexpr double kKbestLlrClip = 15.0;

}  // namespace crosslink
