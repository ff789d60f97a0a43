#pragma once

#include <vector>

#include "crosslink/channel.hpp"
#include "crosslink/cmatrix.hpp"

namespace crosslink {

// Per-subband feedback matrix: row k concatenates the top n_layers
// eigenvectors (each of length n_tx) of subband k's transmit covariance.
struct CsiMatrix {
    int n_subbands = 0;
    int n_tx = 0;
    int n_layers = 0;
    std::vector<cd> w;  // row-major, n_subbands rows of n_tx*n_layers entries

    std::size_t row_len() const {
        return static_cast<std::size_t>(n_tx) * static_cast<std::size_t>(n_layers);
    }
    cd& at(int subband, int layer, int tx) {
        return w[static_cast<std::size_t>(subband) * row_len() +
                 static_cast<std::size_t>(layer) * static_cast<std::size_t>(n_tx) +
                 static_cast<std::size_t>(tx)];
    }
    const cd& at(int subband, int layer, int tx) const {
        return const_cast<CsiMatrix*>(this)->at(subband, layer, tx);
    }
};

// One n_tx x n_layers mixing matrix per subband.
struct Precoder {
    std::vector<CMatrix> per_subband;

    int n_subbands() const { return static_cast<int>(per_subband.size()); }
};

// Reshapes each feedback row into an n_tx x n_layers matrix whose columns are
// the per-layer vectors. Columns inherit orthonormality from the source
// eigenvectors.
Precoder eigen_precoder(const CsiMatrix& w);

// x_{f,t} = P_{subband(f)} * s_{f,t}. The layer grid s must be
// n_layers x n_subcarriers x n_symbols and the subband partition comes from num.
ResourceGrid apply_precoding(const Precoder& p, const ResourceGrid& s, const Numerology& num);

// Divides the grid by sqrt( (1/(n_sc*n_sym)) * sum_{f,t,ant} |x|^2 ), making
// the average per-RE total transmit power exactly 1. Idempotent and
// scale-invariant; throws std::invalid_argument on an all-zero grid.
ResourceGrid normalize_power(const ResourceGrid& x);

// Layers whose precoder column norm stays below 1e-6 across every subband
// carry no power; returns their indices (diagnostic only, no signaling).
std::vector<int> pruned_layers(const Precoder& p);

}  // namespace crosslink
