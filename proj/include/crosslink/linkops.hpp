#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "crosslink/cmatrix.hpp"
#include "crosslink/precoding.hpp"
#include "crosslink/tensor.hpp"

namespace crosslink {

// Differentiable span of the downlink between the bit-to-symbol model and the
// LLR model: layer symbols -> subband precoding -> fixed channel -> constant
// additive noise -> LMMSE equalization.  Inputs and outputs are interleaved
// real tensors so the span composes with Graph models; the backward pass
// propagates to both the symbols and the precoder entries, including the
// equalizer's own dependence on the effective channel.
//
// Complex gradients use the real-pair convention: for a real scalar loss, the
// gradient stored for entry z is g = dL/d(re z) + i * dL/d(im z), so that
// dL = Re(g^H dz) summed over entries.
class LmmseLink {
  public:
    // channels: one n_rx x n_tx matrix per tensor row (resource element);
    // precoder_of[r] selects the precoder applied to row r; noise holds
    // n_rows * n_rx constant samples (empty = noiseless observation).
    // sigma2 > 0 is the equalizer's noise variance.
    LmmseLink(std::vector<CMatrix> channels, std::vector<int> precoder_of,
              double sigma2, std::vector<cd> noise);

    // symbols: [n_rows, 2*n_layers]; precoders: n_tx x n_layers each.
    // Returns equalized symbols with the same shape.
    Tensor forward(const Tensor& symbols, const std::vector<CMatrix>& precoders);

    // grad_equalized: same shape as forward output.  Accumulates into
    // grad_precoders (must be zero-initialized n_tx x n_layers matrices, one
    // per precoder) and writes grad_symbols.
    void backward(const Tensor& grad_equalized, Tensor& grad_symbols,
                  std::vector<CMatrix>& grad_precoders) const;

    int n_rows() const { return int(channels_.size()); }
    double sigma2() const { return sigma2_; }

  private:
    std::vector<CMatrix> channels_;
    std::vector<int> precoder_of_;
    double sigma2_ = 0.0;
    std::vector<cd> noise_;
    int n_layers_ = 0;
    // forward caches (per row)
    std::vector<CMatrix> a_;      // effective channel H * W
    std::vector<CMatrix> gram_;   // A A^H
    std::vector<std::vector<cd>> z_;  // (A A^H + sigma2 I)^-1 y
    std::vector<std::vector<cd>> s_;  // transmitted layer symbols
};

// Per-matrix Frobenius normalization to unit total power: W / ||W||_F.
// Keeps the per-subband transmit power at exactly one unit so the noise
// variance maps directly to the configured SNR.
class PrecoderNorm {
  public:
    std::vector<CMatrix> forward(const std::vector<CMatrix>& precoders);
    // Maps gradients w.r.t. the normalized matrices back to the raw ones.
    std::vector<CMatrix> backward(const std::vector<CMatrix>& grad_out) const;

  private:
    std::vector<CMatrix> normalized_;
    std::vector<double> norms_;
};

// Mean squared generalized cosine similarity between the reference feedback
// matrix and reconstructed per-subband precoders (columns = layers), averaged
// over subbands and layers.  When grad is non-null it receives d(sgcs)/dP in
// the real-pair convention, one matrix per subband (overwritten, not
// accumulated).
double sgcs_with_grad(const CsiMatrix& w, const std::vector<CMatrix>& p,
                      std::vector<CMatrix>* grad);

// Natural-log binary cross-entropy between bits and LLRs under
// P(bit = 1) = sigmoid(-llr), averaged over all bit positions.  When grad is
// non-null it receives dBCE/dllr with the same mean normalization.
double bce_with_grad(const std::vector<std::uint8_t>& bits, const Tensor& llrs,
                     Tensor* grad);

// Decoder-output tensor [batch, n_subbands, 2*n_tx*n_layers] (or the same
// data flattened per batch row) to per-batch-item precoder matrices, laid out
// like the feedback matrix rows: entry 2*(layer*n_tx + antenna).
std::vector<std::vector<CMatrix>> unpack_precoders(const Tensor& t, int n_subbands,
                                                   int n_tx, int n_layers);

// Adjoint of unpack_precoders: scatters per-matrix gradients back into a
// tensor of the given shape.
Tensor pack_precoder_grads(const std::vector<std::vector<CMatrix>>& grads,
                           const std::vector<std::int64_t>& shape);

// Interleaved-real rows to per-row complex vectors and back.
std::vector<std::vector<cd>> rows_to_complex(const Tensor& t);
Tensor complex_to_rows(const std::vector<std::vector<cd>>& rows);

}  // namespace crosslink
