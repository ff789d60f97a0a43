#include "crosslink/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crosslink/rng.hpp"

namespace crosslink {

namespace {

constexpr double kLogClip = 700.0;  // exp(+-700) saturation for ratios
const double kLn2 = std::log(2.0);

// Clamped exp of a log-domain ratio.
double exp_clamped(double log_ratio) {
    return std::exp(std::clamp(log_ratio, -kLogClip, kLogClip));
}

}  // namespace

double ConstellationSet::average_power() const {
    if (points.empty() || n_complex <= 0) return 0.0;
    double total = 0.0;
    for (double v : points) total += v * v;
    return total / (double(order()) * double(n_complex));
}

void ConstellationSet::validate() const {
    if (bits < 1 || bits > 12)
        throw std::invalid_argument("constellation label width must be 1..12 bits");
    if (n_complex < 1)
        throw std::invalid_argument("constellation needs at least one complex dimension");
    const std::size_t expect = std::size_t(order()) * std::size_t(real_dims());
    if (points.size() != expect)
        throw std::invalid_argument("constellation point storage does not match 2^bits x 2N");
    for (double v : points)
        if (!std::isfinite(v))
            throw std::invalid_argument("constellation has non-finite coordinates");
}

ConstellationSet constellation_from_qam(const QamConstellation& c) {
    ConstellationSet cs;
    cs.bits = c.bits_per_symbol;
    cs.n_complex = 1;
    cs.points.resize(std::size_t(cs.order()) * 2);
    for (int label = 0; label < cs.order(); ++label) {
        cs.points[std::size_t(label) * 2] = c.points[std::size_t(label)].real();
        cs.points[std::size_t(label) * 2 + 1] = c.points[std::size_t(label)].imag();
    }
    cs.validate();
    return cs;
}

ConstellationSet constellation_layers(const ConstellationSet& base, int n_layers) {
    base.validate();
    if (n_layers < 1) throw std::invalid_argument("layer count must be positive");
    if (base.bits * n_layers > 12)
        throw std::invalid_argument("layered constellation exceeds the 4096-point cap");
    ConstellationSet cs;
    cs.bits = base.bits * n_layers;
    cs.n_complex = base.n_complex * n_layers;
    cs.points.resize(std::size_t(cs.order()) * std::size_t(cs.real_dims()));
    const int group_mask = base.order() - 1;
    for (int label = 0; label < cs.order(); ++label) {
        double* dst = cs.point(label);
        for (int layer = 0; layer < n_layers; ++layer) {
            // Leading bit group addresses layer 0.
            const int sub = (label >> (base.bits * (n_layers - 1 - layer))) & group_mask;
            const double* src = base.point(sub);
            std::copy(src, src + base.real_dims(),
                      dst + std::size_t(layer) * std::size_t(base.real_dims()));
        }
    }
    return cs;
}

namespace {

// Subset likelihood masses for one receive point: weights[x] = exp(e_x - E)
// with E the global max exponent, accumulated into per-(bit, value) sums.
// The shared offset E cancels in every ratio the callers form.
struct SubsetSums {
    std::vector<double> same_or_sums;  // 2*m entries: [bit*2 + value]
};

void accumulate_subset_sums(const ConstellationSet& cs, const double* y,
                            double sigma2, std::vector<double>& exponents,
                            std::vector<double>& sums) {
    const int m = cs.bits;
    const int big_m = cs.order();
    const int dims = cs.real_dims();
    exponents.resize(std::size_t(big_m));
    double e_max = -1e300;
    for (int x = 0; x < big_m; ++x) {
        const double* px = cs.point(x);
        double d2 = 0.0;
        for (int d = 0; d < dims; ++d) {
            const double diff = y[d] - px[d];
            d2 += diff * diff;
        }
        const double e = -d2 / sigma2;
        exponents[std::size_t(x)] = e;
        e_max = std::max(e_max, e);
    }
    sums.assign(std::size_t(2 * m), 0.0);
    for (int x = 0; x < big_m; ++x) {
        const double w = std::exp(exponents[std::size_t(x)] - e_max);
        for (int i = 0; i < m; ++i) {
            const int bi = (x >> (m - 1 - i)) & 1;
            sums[std::size_t(2 * i + bi)] += w;
        }
    }
}

}  // namespace

double llr_ratio(const ConstellationSet& cs, const double* y, int bit_index,
                 int b, double sigma2) {
    cs.validate();
    if (sigma2 <= 0.0) throw std::invalid_argument("noise variance must be positive");
    if (bit_index < 0 || bit_index >= cs.bits)
        throw std::invalid_argument("bit index out of range");
    if (b != 0 && b != 1) throw std::invalid_argument("bit value must be 0 or 1");
    std::vector<double> exponents, sums;
    accumulate_subset_sums(cs, y, sigma2, exponents, sums);
    const double same = sums[std::size_t(2 * bit_index + b)];
    const double opp = sums[std::size_t(2 * bit_index + (1 - b))];
    if (opp <= 0.0) return 0.0;
    if (same <= 0.0) return exp_clamped(kLogClip);
    return exp_clamped(std::log(opp) - std::log(same));
}

namespace {

struct ShardAccum {
    double sum = 0.0;       // definition-route penalty, bits
    double sum_sq = 0.0;
    double sum_bce = 0.0;   // posterior-route penalty, bits
    std::int64_t count = 0;
};

// One Monte-Carlo shard: draw symbols uniformly, add complex AWGN with
// per-dimension variance sigma2, and accumulate both penalty routes.
ShardAccum run_shard(const ConstellationSet& cs, double sigma2,
                     std::int64_t n_samples, Rng rng) {
    const int m = cs.bits;
    const int dims = cs.real_dims();
    const double noise_std = std::sqrt(sigma2 / 2.0);
    std::vector<double> y(static_cast<std::size_t>(dims));
    std::vector<double> exponents, sums;
    ShardAccum acc;
    for (std::int64_t s = 0; s < n_samples; ++s) {
        const int tx = int(rng.below(std::uint64_t(cs.order())));
        const double* px = cs.point(tx);
        for (int d = 0; d < dims; ++d) y[std::size_t(d)] = px[d] + noise_std * rng.normal();
        accumulate_subset_sums(cs, y.data(), sigma2, exponents, sums);
        double t_def = 0.0;
        double t_bce = 0.0;
        for (int i = 0; i < m; ++i) {
            const int bi = (tx >> (m - 1 - i)) & 1;
            const double same = sums[std::size_t(2 * i + bi)];
            const double opp = sums[std::size_t(2 * i + (1 - bi))];
            if (same <= 0.0) {
                t_def += kLogClip / kLn2;
                t_bce += kLogClip / kLn2;
                continue;
            }
            // Likelihood-ratio route: log2(1 + l) with l = opp/same.
            const double l = opp <= 0.0
                                 ? 0.0
                                 : exp_clamped(std::log(opp) - std::log(same));
            t_def += std::log1p(l) / kLn2;
            // Posterior route: -log2 P(true bit | y).
            const double posterior = same / (same + opp);
            t_bce += -std::log2(posterior);
        }
        acc.sum += t_def;
        acc.sum_sq += t_def * t_def;
        acc.sum_bce += t_bce;
        acc.count += 1;
    }
    return acc;
}

void check_mc_args(const ConstellationSet& cs, double sigma2,
                   std::int64_t samples) {
    cs.validate();
    if (sigma2 <= 0.0) throw std::invalid_argument("noise variance must be positive");
    if (samples < 10000)
        throw std::invalid_argument("capacity estimation needs at least 1e4 samples");
}

}  // namespace

CapacityEstimate bicm_capacity_mc(const ConstellationSet& cs, double sigma2,
                                  std::int64_t samples, std::uint64_t seed,
                                  int shards) {
    check_mc_args(cs, sigma2, samples);
    if (shards < 1) throw std::invalid_argument("shard count must be positive");
    ShardAccum total;
    const std::int64_t base = samples / shards;
    const std::int64_t extra = samples % shards;
    for (int k = 0; k < shards; ++k) {
        const std::int64_t n = base + (k < extra ? 1 : 0);
        if (n == 0) continue;
        ShardAccum a = run_shard(cs, sigma2, n,
                                 Rng::stream(seed, 0x62696300ULL + std::uint64_t(k)));
        total.sum += a.sum;
        total.sum_sq += a.sum_sq;
        total.sum_bce += a.sum_bce;
        total.count += a.count;
    }
    CapacityEstimate est;
    est.samples = total.count;
    const double mean = total.sum / double(total.count);
    const double var =
        std::max(0.0, total.sum_sq / double(total.count) - mean * mean);
    est.capacity = double(cs.bits) - mean;
    est.std_error = std::sqrt(var / double(total.count));
    return est;
}

ConsistencyPair bce_capacity_consistency(const ConstellationSet& cs,
                                         double sigma2, std::int64_t samples,
                                         std::uint64_t seed) {
    check_mc_args(cs, sigma2, samples);
    ShardAccum a = run_shard(cs, sigma2, samples,
                             Rng::stream(seed, 0x62696300ULL));
    ConsistencyPair pair;
    pair.capacity_from_bce = double(cs.bits) - a.sum_bce / double(a.count);
    pair.capacity_from_definition = double(cs.bits) - a.sum / double(a.count);
    return pair;
}

double sphere_min_distance(int n_complex, int m_points) {
    if (n_complex < 1) throw std::invalid_argument("dimension count must be positive");
    if (m_points < 2) throw std::invalid_argument("need at least two points");
    return std::sqrt(double(n_complex) + 1.0) *
           std::pow(double(m_points), -1.0 / (2.0 * double(n_complex)));
}

double sphere_power(double radius, int n_complex) {
    if (n_complex < 1) throw std::invalid_argument("dimension count must be positive");
    if (radius <= 0.0) throw std::invalid_argument("radius must be positive");
    return radius * radius / (double(n_complex) + 1.0);
}

double qam_cube_power(double radius) {
    if (radius <= 0.0) throw std::invalid_argument("radius must be positive");
    return radius * radius / 12.0;
}

double shaping_gain_ratio(int n_complex) {
    if (n_complex < 1) throw std::invalid_argument("dimension count must be positive");
    const double n = double(n_complex);
    // (N!)^(1/N) through lgamma so the ratio stays finite for large N.
    const double factorial_root = std::exp(std::lgamma(n + 1.0) / n);
    return M_PI * (n + 1.0) / (6.0 * factorial_root);
}

double shaping_gain_limit() { return M_PI * std::exp(1.0) / 6.0; }

double empirical_min_distance(const ConstellationSet& cs) {
    cs.validate();
    const int big_m = cs.order();
    const int dims = cs.real_dims();
    double best = 1e300;
    for (int a = 0; a < big_m; ++a) {
        const double* pa = cs.point(a);
        for (int b = a + 1; b < big_m; ++b) {
            const double* pb = cs.point(b);
            double d2 = 0.0;
            for (int d = 0; d < dims; ++d) {
                const double diff = pa[d] - pb[d];
                d2 += diff * diff;
            }
            best = std::min(best, d2);
        }
    }
    return big_m < 2 ? 0.0 : std::sqrt(best);
}

double sampled_min_distance(const ConstellationSet& cs, std::int64_t pairs,
                            std::uint64_t seed) {
    cs.validate();
    if (pairs < 1) throw std::invalid_argument("pair count must be positive");
    const int big_m = cs.order();
    const int dims = cs.real_dims();
    Rng rng(seed);
    double best = 1e300;
    for (std::int64_t p = 0; p < pairs; ++p) {
        const int a = int(rng.below(std::uint64_t(big_m)));
        int b = int(rng.below(std::uint64_t(big_m - 1)));
        if (b >= a) ++b;
        const double* pa = cs.point(a);
        const double* pb = cs.point(b);
        double d2 = 0.0;
        for (int d = 0; d < dims; ++d) {
            const double diff = pa[d] - pb[d];
            d2 += diff * diff;
        }
        best = std::min(best, d2);
    }
    return std::sqrt(best);
}

}  // namespace crosslink
