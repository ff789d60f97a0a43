#pragma once

#include <cstdint>
#include <string>

#include "crosslink/capacity.hpp"
#include "crosslink/graph.hpp"
#include "crosslink/rng.hpp"
#include "crosslink/tensor.hpp"

namespace crosslink {

// Joint bit-to-symbol mapping over all spatial layers of one RE: the payload
// bit vector is mapped to one point in a 2*n_layers-dimensional real space
// (n_layers complex symbols) by a dense network, and demapped to per-bit
// LLRs by a pointwise residual network.  Both nets act per RE, so batches
// are [n_re, features].
struct CrossModConfig {
    int bits_per_re = 4;   // payload bits carried by one RE across all layers
    int n_layers = 2;      // complex symbols produced per RE
    int hidden = 256;      // dense width in the mapper
    int n_dense = 4;       // hidden dense layers in the mapper
    int demod_width = 256; // channel width in the demapper
    int n_res = 4;         // residual blocks in the demapper

    void validate() const;
};

struct CrossLayerModulator {
    CrossModConfig cfg;
    Graph mod;    // [*, bits_per_re] -> [*, 2*n_layers], unit average power
    Graph demod;  // [*, 2*n_layers] -> [*, bits_per_re] LLRs (positive = bit 0)
};

// Builds both graphs and initializes parameters from the seed stream.
CrossLayerModulator make_cross_layer_modulator(const CrossModConfig& cfg,
                                               std::uint64_t seed);

// Bit rows (0/1 values, shape [n_re, bits_per_re]) to interleaved complex
// symbol rows [n_re, 2*n_layers].  Mode selects the normalization statistics:
// Train/Population use the presented batch, Infer uses the frozen running
// power estimate.
Tensor cross_layer_modulate(CrossLayerModulator& m, const Tensor& bits,
                            Mode mode);

// Equalized symbol rows [n_re, 2*n_layers] to LLR rows [n_re, bits_per_re].
Tensor cross_layer_demodulate(CrossLayerModulator& m, const Tensor& equalized,
                              Mode mode);

// Runs every payload pattern through the mapper at once (population
// statistics), yielding the labeled constellation.  Bit i of a label is its
// i-th network input (most significant first).  Requires bits_per_re <= 12.
ConstellationSet enumerate_constellation(CrossLayerModulator& m);

// Expands a label into a 0/1 row vector matching the mapper input layout.
void label_to_bits(int label, int bits, double* out);

struct ModelCost {
    std::int64_t params = 0;
    std::int64_t flops = 0;  // multiply-add pairs x2, per RE (or per sample)
};

// Parameter count plus forward cost for one sample of the given trailing
// feature shape (for per-RE models: the single-RE feature vector).
ModelCost model_cost(const Graph& g, std::vector<std::int64_t> feature_shape);

// CSV dump of a labeled constellation: one row per bit pattern with the
// per-layer complex coordinates.
void dump_constellation_csv(const ConstellationSet& cs, const std::string& path);

// Model archive round trip (architecture in metadata, tensors in the
// payload).  `save` writes <prefix>.json/<prefix>.bin; `load` rebuilds the
// graphs from metadata and restores every parameter and running statistic.
void save_cross_layer_modulator(const CrossLayerModulator& m,
                                const std::string& prefix);
CrossLayerModulator load_cross_layer_modulator(const std::string& prefix);

}  // namespace crosslink
