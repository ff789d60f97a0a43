#include "crosslink/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "crosslink/llr.hpp"

namespace crosslink {

namespace {

constexpr double kErrorFloor = 1e-12;

CMatrix column(const std::vector<cd>& y) {
    CMatrix m(static_cast<int>(y.size()), 1);
    for (std::size_t i = 0; i < y.size(); ++i) m.at(static_cast<int>(i), 0) = y[i];
    return m;
}

}  // namespace

EqualizerOutput lmmse_equalize(const CMatrix& heq, const std::vector<cd>& y, double sigma2) {
    if (heq.rows != static_cast<int>(y.size()))
        throw std::invalid_argument("lmmse_equalize: y length does not match channel rows");
    if (sigma2 < 0.0) throw std::invalid_argument("lmmse_equalize: negative noise variance");

    const int nl = heq.cols;
    // Gram-side form of Heq^H (Heq Heq^H + sigma2 I)^-1 y; identical by the
    // push-through identity and non-singular for every sigma2 > 0.
    const CMatrix gram = heq.adjoint_times(heq);
    const CMatrix hy = heq.adjoint_times(column(y));
    const CMatrix xhat = solve_hermitian_shifted(gram, sigma2, hy);
    const CMatrix ginv = solve_hermitian_shifted(gram, sigma2, CMatrix::identity(nl));

    EqualizerOutput out;
    out.x_hat.resize(static_cast<std::size_t>(nl));
    out.post_sinr.resize(static_cast<std::size_t>(nl));
    out.bias.resize(static_cast<std::size_t>(nl));
    out.noise_var.resize(static_cast<std::size_t>(nl));
    for (int i = 0; i < nl; ++i) {
        out.x_hat[static_cast<std::size_t>(i)] = xhat.at(i, 0);
        // Error covariance diagonal E_ii = sigma2 * [(Gram + sigma2 I)^-1]_ii.
        const double e = std::max(sigma2 * ginv.at(i, i).real(), kErrorFloor);
        out.post_sinr[static_cast<std::size_t>(i)] = std::max(1.0 / e - 1.0, 0.0);
        const double mu = std::clamp(1.0 - e, kErrorFloor, 1.0);
        out.bias[static_cast<std::size_t>(i)] = mu;
        out.noise_var[static_cast<std::size_t>(i)] = std::max(mu * e, kErrorFloor);
    }
    return out;
}

EqualizerOutput zf_equalize(const CMatrix& heq, const std::vector<cd>& y, double sigma2) {
    if (heq.rows != static_cast<int>(y.size()))
        throw std::invalid_argument("zf_equalize: y length does not match channel rows");

    const int nl = heq.cols;
    const CMatrix gram = heq.adjoint_times(heq);
    const CMatrix hy = heq.adjoint_times(column(y));
    const CMatrix xhat = solve_hermitian_shifted(gram, 0.0, hy);
    const CMatrix ginv = solve_hermitian_shifted(gram, 0.0, CMatrix::identity(nl));

    EqualizerOutput out;
    out.x_hat.resize(static_cast<std::size_t>(nl));
    out.post_sinr.resize(static_cast<std::size_t>(nl));
    out.bias.assign(static_cast<std::size_t>(nl), 1.0);  // ZF is unbiased
    out.noise_var.resize(static_cast<std::size_t>(nl));
    for (int i = 0; i < nl; ++i) {
        out.x_hat[static_cast<std::size_t>(i)] = xhat.at(i, 0);
        const double amp = std::max(sigma2 * ginv.at(i, i).real(), kErrorFloor);
        out.post_sinr[static_cast<std::size_t>(i)] = 1.0 / amp;
        out.noise_var[static_cast<std::size_t>(i)] = amp;
    }
    return out;
}

KBestResult kbest_detect(const CMatrix& heq, const std::vector<cd>& y,
                         const QamConstellation& c, int k, double sigma2) {
    if (heq.rows != static_cast<int>(y.size()))
        throw std::invalid_argument("kbest_detect: y length does not match channel rows");
    if (heq.rows < heq.cols)
        throw std::invalid_argument("kbest_detect: needs at least as many rx dims as layers");
    if (k <= 0) throw std::invalid_argument("kbest_detect: k must be positive");
    if (sigma2 <= 0.0) throw std::invalid_argument("kbest_detect: sigma2 must be > 0");

    const int nl = heq.cols;
    const int m = c.bits_per_symbol;
    const int order = c.order();

    CMatrix q, r;
    qr_thin(heq, q, r);
    for (int i = 0; i < nl; ++i)
        if (r.at(i, i).real() <= 1e-12)
            throw std::runtime_error("kbest_detect: rank-deficient channel");
    const CMatrix yt = q.adjoint_times(column(y));
    // Thin QR drops the component of y outside the column space; fold that
    // constant back in so path metrics equal the full distance |y - Heq s|^2.
    double offset = 0.0;
    for (const cd& v : y) offset += std::norm(v);
    for (int i = 0; i < nl; ++i) offset -= std::norm(yt.at(i, 0));
    offset = std::max(offset, 0.0);

    struct Path {
        double metric;
        std::vector<int> labels;  // labels[j] is the symbol of layer nl-1-j
    };
    std::vector<Path> front = {{offset, {}}};
    std::vector<Path> expanded;
    for (int level = nl - 1; level >= 0; --level) {
        expanded.clear();
        expanded.reserve(front.size() * static_cast<std::size_t>(order));
        for (const Path& p : front) {
            // Interference from the already-fixed lower-triangular-free layers.
            cd fixed = yt.at(level, 0);
            for (int j = level + 1; j < nl; ++j)
                fixed -= r.at(level, j) *
                         c.points[static_cast<std::size_t>(
                             p.labels[static_cast<std::size_t>(nl - 1 - j)])];
            for (int label = 0; label < order; ++label) {
                const cd res = fixed - r.at(level, level) * c.points[static_cast<std::size_t>(label)];
                Path np = p;
                np.metric += std::norm(res);
                np.labels.push_back(label);
                expanded.push_back(std::move(np));
            }
        }
        if (level > 0 && static_cast<int>(expanded.size()) > k) {
            std::nth_element(expanded.begin(), expanded.begin() + k, expanded.end(),
                             [](const Path& a, const Path& b) { return a.metric < b.metric; });
            expanded.resize(static_cast<std::size_t>(k));
        }
        front.swap(expanded);
    }

    // front now holds the surviving full paths (final level keeps the whole
    // expansion so the list demapper sees every retained leaf).
    const Path* best = &front.front();
    for (const Path& p : front)
        if (p.metric < best->metric) best = &p;

    KBestResult out;
    out.best_metric = best->metric;
    out.hard_labels.resize(static_cast<std::size_t>(nl));
    out.hard_symbols.resize(static_cast<std::size_t>(nl));
    for (int l = 0; l < nl; ++l) {
        const int label = best->labels[static_cast<std::size_t>(nl - 1 - l)];
        out.hard_labels[static_cast<std::size_t>(l)] = label;
        out.hard_symbols[static_cast<std::size_t>(l)] = c.points[static_cast<std::size_t>(label)];
    }

    // List max-log LLRs over the retained candidates.
    constexpr double inf = std::numeric_limits<double>::infinity();
    out.llrs.assign(static_cast<std::size_t>(nl) * static_cast<std::size_t>(m), 0.0);
    for (int l = 0; l < nl; ++l) {
        for (int b = 0; b < m; ++b) {
            double min0 = inf, min1 = inf;
            for (const Path& p : front) {
                const int label = p.labels[static_cast<std::size_t>(nl - 1 - l)];
                const bool bit_set = (label >> (m - 1 - b)) & 1;
                double& slot = bit_set ? min1 : min0;
                if (p.metric < slot) slot = p.metric;
            }
            double llr;
            if (min0 == inf)
                llr = -kKbestLlrClip;  // every candidate says bit 1
            else if (min1 == inf)
                llr = kKbestLlrClip;   // every candidate says bit 0
            else
                llr = clip_llr((min1 - min0) / sigma2);
            out.llrs[static_cast<std::size_t>(l) * static_cast<std::size_t>(m) +
                     static_cast<std::size_t>(b)] = llr;
        }
    }
    return out;
}

}  // namespace crosslink
