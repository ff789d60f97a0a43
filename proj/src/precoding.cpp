#include "crosslink/precoding.hpp"

#include <cmath>
#include <stdexcept>

namespace crosslink {

Precoder eigen_precoder(const CsiMatrix& w) {
    if (w.n_subbands <= 0 || w.n_tx <= 0 || w.n_layers <= 0)
        throw std::invalid_argument("eigen_precoder: empty CsiMatrix");
    Precoder p;
    p.per_subband.reserve(static_cast<std::size_t>(w.n_subbands));
    for (int k = 0; k < w.n_subbands; ++k) {
        CMatrix m(w.n_tx, w.n_layers);
        for (int l = 0; l < w.n_layers; ++l)
            for (int t = 0; t < w.n_tx; ++t) m.at(t, l) = w.at(k, l, t);
        p.per_subband.push_back(std::move(m));
    }
    return p;
}

ResourceGrid apply_precoding(const Precoder& p, const ResourceGrid& s, const Numerology& num) {
    num.validate();
    if (p.n_subbands() != num.n_subbands)
        throw std::invalid_argument("apply_precoding: precoder subband count mismatch");
    if (s.n_sc != num.n_subcarriers || s.n_sym != num.n_symbols)
        throw std::invalid_argument("apply_precoding: layer grid does not match numerology");
    const CMatrix& first = p.per_subband.front();
    if (s.n_ant != first.cols)
        throw std::invalid_argument("apply_precoding: layer count does not match precoder");

    ResourceGrid x(first.rows, s.n_sc, s.n_sym);
    for (int f = 0; f < s.n_sc; ++f) {
        const CMatrix& pm = p.per_subband[static_cast<std::size_t>(num.subband_of(f))];
        if (pm.rows != first.rows || pm.cols != first.cols)
            throw std::invalid_argument("apply_precoding: inconsistent per-subband shapes");
        for (int t = 0; t < s.n_sym; ++t)
            for (int a = 0; a < pm.rows; ++a) {
                cd acc = 0.0;
                for (int l = 0; l < pm.cols; ++l) acc += pm.at(a, l) * s.at(l, f, t);
                x.at(a, f, t) = acc;
            }
    }
    return x;
}

ResourceGrid normalize_power(const ResourceGrid& x) {
    double total = 0.0;
    for (const cd& v : x.v) total += std::norm(v);
    const double res = static_cast<double>(x.n_sc) * static_cast<double>(x.n_sym);
    if (res <= 0.0 || total <= 0.0)
        throw std::invalid_argument("normalize_power: all-zero or empty grid");
    const double divisor = std::sqrt(total / res);
    ResourceGrid out = x;
    for (cd& v : out.v) v /= divisor;
    return out;
}

std::vector<int> pruned_layers(const Precoder& p) {
    std::vector<int> out;
    if (p.per_subband.empty()) return out;
    const int n_layers = p.per_subband.front().cols;
    for (int l = 0; l < n_layers; ++l) {
        bool dead = true;
        for (const CMatrix& m : p.per_subband) {
            double norm_sq = 0.0;
            for (int t = 0; t < m.rows; ++t) norm_sq += std::norm(m.at(t, l));
            if (std::sqrt(norm_sq) >= 1e-6) {
                dead = false;
                break;
            }
        }
        if (dead) out.push_back(l);
    }
    return out;
}

}  // namespace crosslink
