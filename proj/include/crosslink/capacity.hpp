#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "crosslink/qam.hpp"

namespace crosslink {

// Labeled multi-dimensional constellation: 2^bits points in n_complex complex
// dimensions.  Row `label` of `points` holds the coordinates of the symbol
// carrying that bit pattern, interleaved [re0, im0, re1, im1, ...].  Bit 0 of
// a label is its most significant bit.
struct ConstellationSet {
    int bits = 0;       // label width m, so 2^m points
    int n_complex = 0;  // N complex dimensions (2N reals per point)
    std::vector<double> points;  // 2^m rows of 2N values each

    int order() const { return 1 << bits; }
    int real_dims() const { return 2 * n_complex; }
    const double* point(int label) const {
        return points.data() + std::size_t(label) * std::size_t(real_dims());
    }
    double* point(int label) {
        return points.data() + std::size_t(label) * std::size_t(real_dims());
    }

    // Mean squared norm per complex dimension (1.0 for a unit-power design).
    double average_power() const;

    // Throws std::invalid_argument on inconsistent shape, non-finite
    // coordinates, or more than 4096 points (the exhaustive-enumeration cap).
    void validate() const;
};

// Single-layer wrapper around a Gray QAM constellation.
ConstellationSet constellation_from_qam(const QamConstellation& c);

// Stack `n_layers` independent copies of a constellation into one labeled
// product set.  The leading bit group of a product label addresses layer 0.
ConstellationSet constellation_layers(const ConstellationSet& base, int n_layers);

struct CapacityEstimate {
    double capacity = 0.0;   // bits per channel use
    double std_error = 0.0;  // Monte-Carlo standard error of the mean
    std::int64_t samples = 0;
};

// Monte-Carlo estimate of the bit-interleaved capacity of `cs` over the
// complex AWGN channel with per-complex-dimension noise variance sigma2:
//   C = m - E[ sum_i log2( sum_x p(y|x) / sum_{x in X_bi} p(y|x) ) ]
// where bi is the transmitted value of bit i and the expectation runs over
// uniformly drawn symbols plus noise.  All likelihood sums are evaluated in
// the log domain with max-subtraction.  Work is split into `shards`
// independently seeded sample blocks; the result is bit-identical for a
// fixed (seed, shards) pair regardless of evaluation order.
CapacityEstimate bicm_capacity_mc(const ConstellationSet& cs, double sigma2,
                                  std::int64_t samples, std::uint64_t seed,
                                  int shards = 1);

// Likelihood ratio for bit `bit_index` taking value `b` at receive point y
// (length 2N reals): sum of opposite-subset likelihoods over sum of
// same-subset likelihoods.  Log-domain; the returned ratio saturates at
// exp(+-700).
double llr_ratio(const ConstellationSet& cs, const double* y, int bit_index,
                 int b, double sigma2);

// Both capacity routes on one shared sample set: first from the binary
// cross-entropy of the exact posterior bit probabilities (base 2), second
// from the likelihood-ratio form above.  The two are the same expression
// rearranged and must agree to rounding error.
struct ConsistencyPair {
    double capacity_from_bce = 0.0;
    double capacity_from_definition = 0.0;
};
ConsistencyPair bce_capacity_consistency(const ConstellationSet& cs,
                                         double sigma2, std::int64_t samples,
                                         std::uint64_t seed);

// Sphere-packing approximation of the minimum distance of an M-point
// unit-power constellation in N complex dimensions: sqrt(N+1) * M^(-1/(2N)).
double sphere_min_distance(int n_complex, int m_points);

// Average power of a uniform distribution over the 2N-ball of radius R.
double sphere_power(double radius, int n_complex);

// Per-real-dimension average power of a uniform distribution over a cube of
// side R (the QAM lattice envelope): R^2 / 12.
double qam_cube_power(double radius);

// Power ratio of the cubic envelope to the spherical envelope at equal
// minimum distance: pi*(N+1) / (6 * (N!)^(1/N)).  Monotone increasing in N,
// approaching pi*e/6.  Evaluated through lgamma so large N stays finite.
double shaping_gain_ratio(int n_complex);

// Limit of shaping_gain_ratio: pi*e/6 (about 1.533 dB).
double shaping_gain_limit();

// Exact minimum pairwise Euclidean distance (2N-dimensional); exhaustive over
// all pairs, so the 4096-point cap applies.
double empirical_min_distance(const ConstellationSet& cs);

// Sampled lower-ish estimate of the minimum pairwise distance for sets too
// large to enumerate: examines `pairs` random pairs.  Approximate by
// construction; exact only if every pair happens to be visited.
double sampled_min_distance(const ConstellationSet& cs, std::int64_t pairs,
                            std::uint64_t seed);

}  // namespace crosslink
