#include "crosslink/linkops.hpp"

#include <cmath>
#include <stdexcept>

namespace crosslink {

namespace {

// Column vector wrapper for the Hermitian solver.
CMatrix as_column(const std::vector<cd>& v) {
    CMatrix m(int(v.size()), 1);
    m.a = v;
    return m;
}

std::vector<cd> column_of(const CMatrix& m) { return m.col(0); }

// Outer product x y^H.
CMatrix outer(const std::vector<cd>& x, const std::vector<cd>& y) {
    CMatrix m(int(x.size()), int(y.size()));
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) m.at(r, c) = x[std::size_t(r)] * std::conj(y[std::size_t(c)]);
    return m;
}

// Row vector v^H A as a plain vector of length A.cols.
std::vector<cd> adjoint_vec_times(const std::vector<cd>& v, const CMatrix& a) {
    std::vector<cd> out(std::size_t(a.cols), cd(0, 0));
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c)
            out[std::size_t(c)] += std::conj(v[std::size_t(r)]) * a.at(r, c);
    return out;
}

std::vector<cd> adjoint_mat_vec(const CMatrix& a, const std::vector<cd>& v) {
    std::vector<cd> out(std::size_t(a.cols), cd(0, 0));
    for (int r = 0; r < a.rows; ++r)
        for (int c = 0; c < a.cols; ++c)
            out[std::size_t(c)] += std::conj(a.at(r, c)) * v[std::size_t(r)];
    return out;
}

double stable_softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

LmmseLink::LmmseLink(std::vector<CMatrix> channels, std::vector<int> precoder_of,
                     double sigma2, std::vector<cd> noise)
    : channels_(std::move(channels)),
      precoder_of_(std::move(precoder_of)),
      sigma2_(sigma2),
      noise_(std::move(noise)) {
    if (channels_.empty()) throw std::invalid_argument("link span needs at least one row");
    if (precoder_of_.size() != channels_.size())
        throw std::invalid_argument("one precoder index per channel row required");
    if (!(sigma2_ > 0.0))
        throw std::invalid_argument("equalizer noise variance must be positive");
    const int n_rx = channels_.front().rows;
    for (const CMatrix& h : channels_)
        if (h.rows != n_rx || h.cols != channels_.front().cols)
            throw std::invalid_argument("channel rows must share dimensions");
    if (!noise_.empty() && noise_.size() != channels_.size() * std::size_t(n_rx))
        throw std::invalid_argument("noise length must be n_rows * n_rx");
}

Tensor LmmseLink::forward(const Tensor& symbols, const std::vector<CMatrix>& precoders) {
    const int rows = n_rows();
    const int n_rx = channels_.front().rows;
    const int n_tx = channels_.front().cols;
    if (symbols.shape.size() != 2 || symbols.shape[0] != rows)
        throw std::invalid_argument("symbol tensor must be [n_rows, 2*n_layers]");
    n_layers_ = int(symbols.shape[1] / 2);
    if (symbols.shape[1] != 2 * n_layers_ || n_layers_ <= 0)
        throw std::invalid_argument("symbol tensor must have an even feature width");
    for (int r = 0; r < rows; ++r) {
        const int k = precoder_of_[std::size_t(r)];
        if (k < 0 || k >= int(precoders.size()))
            throw std::invalid_argument("precoder index out of range");
        const CMatrix& w = precoders[std::size_t(k)];
        if (w.rows != n_tx || w.cols != n_layers_)
            throw std::invalid_argument("precoder must be n_tx x n_layers");
    }

    a_.assign(std::size_t(rows), CMatrix());
    gram_.assign(std::size_t(rows), CMatrix());
    z_.assign(std::size_t(rows), {});
    s_.assign(std::size_t(rows), {});
    Tensor out({rows, 2 * n_layers_});

    for (int r = 0; r < rows; ++r) {
        std::vector<cd>& s = s_[std::size_t(r)];
        s.resize(std::size_t(n_layers_));
        for (int l = 0; l < n_layers_; ++l)
            s[std::size_t(l)] = cd(symbols.data[std::size_t(r) * 2 * n_layers_ + 2 * l],
                                   symbols.data[std::size_t(r) * 2 * n_layers_ + 2 * l + 1]);
        const CMatrix& w = precoders[std::size_t(precoder_of_[std::size_t(r)])];
        CMatrix& a = a_[std::size_t(r)];
        a = channels_[std::size_t(r)] * w;
        gram_[std::size_t(r)] = a * a.adjoint();

        std::vector<cd> y = mat_vec(a, s);
        if (!noise_.empty())
            for (int i = 0; i < n_rx; ++i)
                y[std::size_t(i)] += noise_[std::size_t(r) * std::size_t(n_rx) + std::size_t(i)];

        z_[std::size_t(r)] =
            column_of(solve_hermitian_shifted(gram_[std::size_t(r)], sigma2_, as_column(y)));
        const std::vector<cd> est = adjoint_mat_vec(a, z_[std::size_t(r)]);
        for (int l = 0; l < n_layers_; ++l) {
            out.data[std::size_t(r) * 2 * n_layers_ + 2 * l] = est[std::size_t(l)].real();
            out.data[std::size_t(r) * 2 * n_layers_ + 2 * l + 1] = est[std::size_t(l)].imag();
        }
    }
    return out;
}

void LmmseLink::backward(const Tensor& grad_equalized, Tensor& grad_symbols,
                         std::vector<CMatrix>& grad_precoders) const {
    const int rows = n_rows();
    if (grad_equalized.shape != std::vector<std::int64_t>({rows, 2 * n_layers_}))
        throw std::invalid_argument("gradient shape mismatch");
    if (a_.empty()) throw std::logic_error("backward before forward");
    grad_symbols = Tensor({rows, 2 * n_layers_});

    for (int r = 0; r < rows; ++r) {
        const CMatrix& a = a_[std::size_t(r)];
        const std::vector<cd>& z = z_[std::size_t(r)];
        std::vector<cd> g(static_cast<std::size_t>(n_layers_));
        for (int l = 0; l < n_layers_; ++l)
            g[std::size_t(l)] =
                cd(grad_equalized.data[std::size_t(r) * 2 * n_layers_ + 2 * l],
                   grad_equalized.data[std::size_t(r) * 2 * n_layers_ + 2 * l + 1]);

        // u = (A A^H + sigma2 I)^-1 A g
        const std::vector<cd> ag = mat_vec(a, g);
        const std::vector<cd> u =
            column_of(solve_hermitian_shifted(gram_[std::size_t(r)], sigma2_, as_column(ag)));

        // d/ds: only through y = A s + n.
        const std::vector<cd> gs = adjoint_mat_vec(a, u);
        for (int l = 0; l < n_layers_; ++l) {
            grad_symbols.data[std::size_t(r) * 2 * n_layers_ + 2 * l] = gs[std::size_t(l)].real();
            grad_symbols.data[std::size_t(r) * 2 * n_layers_ + 2 * l + 1] = gs[std::size_t(l)].imag();
        }

        // d/dA of A^H (A A^H + sigma2 I)^-1 (A s + n):
        //   z g^H - u (z^H A) - z (u^H A) + u s^H
        const std::vector<cd> zha = adjoint_vec_times(z, a);
        const std::vector<cd> uha = adjoint_vec_times(u, a);
        CMatrix ca = outer(z, g);
        for (int i = 0; i < ca.rows; ++i)
            for (int j = 0; j < ca.cols; ++j)
                ca.at(i, j) += -u[std::size_t(i)] * zha[std::size_t(j)] -
                               z[std::size_t(i)] * uha[std::size_t(j)] +
                               u[std::size_t(i)] * std::conj(s_[std::size_t(r)][std::size_t(j)]);

        // Chain through A = H W.
        const int k = precoder_of_[std::size_t(r)];
        grad_precoders[std::size_t(k)] += channels_[std::size_t(r)].adjoint_times(ca);
    }
}

std::vector<CMatrix> PrecoderNorm::forward(const std::vector<CMatrix>& precoders) {
    normalized_.clear();
    norms_.clear();
    for (const CMatrix& w : precoders) {
        const double norm = std::sqrt(std::max(w.frobenius_sq(), 1e-30));
        CMatrix n = w;
        n *= cd(1.0 / norm, 0.0);
        normalized_.push_back(std::move(n));
        norms_.push_back(norm);
    }
    return normalized_;
}

std::vector<CMatrix> PrecoderNorm::backward(const std::vector<CMatrix>& grad_out) const {
    if (grad_out.size() != normalized_.size())
        throw std::invalid_argument("gradient count mismatch");
    std::vector<CMatrix> grads;
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
        const CMatrix& g = grad_out[i];
        const CMatrix& n = normalized_[i];
        double dot = 0.0;  // Re tr(G^H W_n)
        for (std::size_t j = 0; j < g.a.size(); ++j)
            dot += g.a[j].real() * n.a[j].real() + g.a[j].imag() * n.a[j].imag();
        CMatrix out = g;
        for (std::size_t j = 0; j < out.a.size(); ++j)
            out.a[j] = (g.a[j] - dot * n.a[j]) / norms_[i];
        grads.push_back(std::move(out));
    }
    return grads;
}

double sgcs_with_grad(const CsiMatrix& w, const std::vector<CMatrix>& p,
                      std::vector<CMatrix>* grad) {
    if (int(p.size()) != w.n_subbands)
        throw std::invalid_argument("one precoder per subband required");
    if (grad) {
        grad->clear();
        for (const CMatrix& m : p) grad->emplace_back(m.rows, m.cols);
    }
    double total = 0.0;
    const double scale = 1.0 / double(w.n_subbands);
    for (int k = 0; k < w.n_subbands; ++k) {
        const CMatrix& pk = p[std::size_t(k)];
        if (pk.rows != w.n_tx || pk.cols != w.n_layers)
            throw std::invalid_argument("precoder must be n_tx x n_layers");
        // Each subband matrix is treated as one vectorized direction.
        cd a(0, 0);
        double wn = 0.0, pn = 0.0;
        for (int l = 0; l < w.n_layers; ++l)
            for (int t = 0; t < w.n_tx; ++t) {
                const cd wv = w.at(k, l, t);
                const cd pv = pk.at(t, l);
                a += std::conj(wv) * pv;
                wn += std::norm(wv);
                pn += std::norm(pv);
            }
        wn = std::max(wn, 1e-30);
        pn = std::max(pn, 1e-30);
        const double denom = wn * pn;
        total += std::norm(a) / denom * scale;
        if (grad) {
            // d/dp of |<w, p>|^2 / (||w||^2 ||p||^2):
            //   (2 a w - 2|a|^2 p / ||p||^2) / (||w||^2 ||p||^2)
            CMatrix& gk = (*grad)[std::size_t(k)];
            for (int l = 0; l < w.n_layers; ++l)
                for (int t = 0; t < w.n_tx; ++t)
                    gk.at(t, l) = scale *
                                  (2.0 * a * w.at(k, l, t) -
                                   (2.0 * std::norm(a) / pn) * pk.at(t, l)) /
                                  denom;
        }
    }
    return total;
}

double bce_with_grad(const std::vector<std::uint8_t>& bits, const Tensor& llrs,
                     Tensor* grad) {
    if (bits.size() != llrs.data.size())
        throw std::invalid_argument("one bit per LLR required");
    if (bits.empty()) throw std::invalid_argument("empty bit vector");
    if (grad) *grad = Tensor(llrs.shape);
    const double inv_n = 1.0 / double(bits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        const double l = llrs.data[i];
        const double c = bits[i] ? 1.0 : 0.0;
        // P(bit=1) = sigmoid(-l):  bce = c*softplus(l) + (1-c)*softplus(-l)
        total += (c * stable_softplus(l) + (1.0 - c) * stable_softplus(-l)) * inv_n;
        if (grad) {
            const double p1 = 1.0 / (1.0 + std::exp(l));
            grad->data[i] = (c - p1) * inv_n;
        }
    }
    return total;
}

std::vector<std::vector<CMatrix>> unpack_precoders(const Tensor& t, int n_subbands,
                                                   int n_tx, int n_layers) {
    const std::size_t row = 2 * std::size_t(n_tx) * std::size_t(n_layers);
    const std::size_t per_item = std::size_t(n_subbands) * row;
    if (t.data.size() % per_item != 0)
        throw std::invalid_argument("tensor size does not match precoder layout");
    const std::size_t batch = t.data.size() / per_item;
    std::vector<std::vector<CMatrix>> out(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        out[b].reserve(std::size_t(n_subbands));
        for (int k = 0; k < n_subbands; ++k) {
            CMatrix m(n_tx, n_layers);
            const std::size_t base = b * per_item + std::size_t(k) * row;
            for (int l = 0; l < n_layers; ++l)
                for (int a = 0; a < n_tx; ++a) {
                    const std::size_t off = base + 2 * (std::size_t(l) * n_tx + a);
                    m.at(a, l) = cd(t.data[off], t.data[off + 1]);
                }
            out[b].push_back(std::move(m));
        }
    }
    return out;
}

Tensor pack_precoder_grads(const std::vector<std::vector<CMatrix>>& grads,
                           const std::vector<std::int64_t>& shape) {
    Tensor t(shape);
    std::size_t off = 0;
    for (const auto& item : grads)
        for (const CMatrix& m : item) {
            for (int l = 0; l < m.cols; ++l)
                for (int a = 0; a < m.rows; ++a) {
                    t.data[off + 2 * (std::size_t(l) * m.rows + a)] = m.at(a, l).real();
                    t.data[off + 2 * (std::size_t(l) * m.rows + a) + 1] = m.at(a, l).imag();
                }
            off += 2 * std::size_t(m.rows) * std::size_t(m.cols);
        }
    if (off != t.data.size())
        throw std::invalid_argument("gradient count does not match tensor shape");
    return t;
}

std::vector<std::vector<cd>> rows_to_complex(const Tensor& t) {
    if (t.shape.size() != 2 || t.shape[1] % 2 != 0)
        throw std::invalid_argument("expected [rows, 2k] tensor");
    const std::size_t rows = std::size_t(t.shape[0]);
    const std::size_t half = std::size_t(t.shape[1]) / 2;
    std::vector<std::vector<cd>> out(rows, std::vector<cd>(half));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < half; ++i)
            out[r][i] = cd(t.data[r * 2 * half + 2 * i], t.data[r * 2 * half + 2 * i + 1]);
    return out;
}

Tensor complex_to_rows(const std::vector<std::vector<cd>>& rows) {
    if (rows.empty()) throw std::invalid_argument("empty row list");
    const std::size_t half = rows.front().size();
    Tensor t({std::int64_t(rows.size()), std::int64_t(2 * half)});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != half) throw std::invalid_argument("ragged row list");
        for (std::size_t i = 0; i < half; ++i) {
            t.data[r * 2 * half + 2 * i] = rows[r][i].real();
            t.data[r * 2 * half + 2 * i + 1] = rows[r][i].imag();
        }
    }
    return t;
}

}  // namespace crosslink
