#pragma once

#include <cstdint>
#include <vector>

#include "crosslink/channel.hpp"
#include "crosslink/precoding.hpp"

namespace crosslink {

// Per subband k, averages the transmit covariance R_k = mean_{f,t} H^H H over
// that subband's resource elements and concatenates the top n_layers
// eigenvectors (unit-norm, deterministic phase, descending eigenvalues) into
// row k. Optionally reports the eigenvalues (n_subbands x n_layers,
// row-major) via eigenvalues_out.
CsiMatrix extract_csi(const ChannelRealization& h, int n_layers,
                      std::vector<double>* eigenvalues_out = nullptr);

// Squared generalized cosine similarity: mean over subbands of
// (|<w_k, p_k>| / (|w_k| |p_k|))^2 with both sides flattened to length
// n_tx*n_layers vectors. Lies in [0,1]; invariant to per-subband complex
// scaling of either argument. Throws std::invalid_argument on a zero vector.
double sgcs(const CsiMatrix& w, const Precoder& p);

struct QuantizedCsi {
    std::vector<std::uint8_t> bits;  // one entry per bit, 0/1
    CsiMatrix reconstructed;
    int bits_per_coefficient = 0;
};

// Scalar magnitude/phase quantization of every feedback coefficient within a
// total bit budget (split evenly across coefficients, phase taking the odd
// bit). Each reconstructed per-layer vector is renormalized to unit norm.
// Throws std::invalid_argument when the budget gives < 2 bits/coefficient.
QuantizedCsi quantized_feedback(const CsiMatrix& w, int bit_budget);

}  // namespace crosslink
