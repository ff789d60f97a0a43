#include "crosslink/cmatrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace crosslink {

CMatrix CMatrix::adjoint() const {
    CMatrix out(cols, rows);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out.at(j, i) = std::conj(at(i, j));
    return out;
}

CMatrix CMatrix::operator*(const CMatrix& rhs) const {
    if (cols != rhs.rows)
        throw std::invalid_argument("matrix product dimension mismatch");
    CMatrix out(rows, rhs.cols);
    for (int i = 0; i < rows; ++i) {
        for (int p = 0; p < cols; ++p) {
            const cd aip = at(i, p);
            if (aip == cd(0, 0)) continue;
            for (int j = 0; j < rhs.cols; ++j)
                out.at(i, j) += aip * rhs.at(p, j);
        }
    }
    return out;
}

CMatrix CMatrix::operator+(const CMatrix& rhs) const {
    if (rows != rhs.rows || cols != rhs.cols)
        throw std::invalid_argument("matrix sum dimension mismatch");
    CMatrix out = *this;
    for (std::size_t i = 0; i < a.size(); ++i) out.a[i] += rhs.a[i];
    return out;
}

CMatrix CMatrix::operator-(const CMatrix& rhs) const {
    if (rows != rhs.rows || cols != rhs.cols)
        throw std::invalid_argument("matrix difference dimension mismatch");
    CMatrix out = *this;
    for (std::size_t i = 0; i < a.size(); ++i) out.a[i] -= rhs.a[i];
    return out;
}

CMatrix& CMatrix::operator*=(cd s) {
    for (auto& v : a) v *= s;
    return *this;
}

CMatrix& CMatrix::operator+=(const CMatrix& rhs) {
    if (rows != rhs.rows || cols != rhs.cols)
        throw std::invalid_argument("matrix sum dimension mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += rhs.a[i];
    return *this;
}

CMatrix CMatrix::adjoint_times(const CMatrix& rhs) const {
    if (rows != rhs.rows)
        throw std::invalid_argument("adjoint product dimension mismatch");
    CMatrix out(cols, rhs.cols);
    for (int p = 0; p < rows; ++p) {
        for (int i = 0; i < cols; ++i) {
            const cd api = std::conj(at(p, i));
            for (int j = 0; j < rhs.cols; ++j)
                out.at(i, j) += api * rhs.at(p, j);
        }
    }
    return out;
}

double CMatrix::frobenius_sq() const {
    double s = 0.0;
    for (const auto& v : a) s += std::norm(v);
    return s;
}

std::vector<cd> CMatrix::col(int c) const {
    std::vector<cd> out(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) out[std::size_t(i)] = at(i, c);
    return out;
}

std::vector<cd> mat_vec(const CMatrix& m, const std::vector<cd>& v) {
    if (std::size_t(m.cols) != v.size())
        throw std::invalid_argument("matrix-vector dimension mismatch");
    std::vector<cd> out(std::size_t(m.rows), cd(0, 0));
    for (int i = 0; i < m.rows; ++i) {
        cd acc(0, 0);
        for (int j = 0; j < m.cols; ++j) acc += m.at(i, j) * v[std::size_t(j)];
        out[std::size_t(i)] = acc;
    }
    return out;
}

namespace {

// Implicit-shift QL sweep on a real symmetric tridiagonal matrix, rotations
// accumulated into the real matrix u (n x n, row-major).
void tridiag_ql(std::vector<double>& d, std::vector<double>& e, int n,
                std::vector<double>& u) {
    if (n == 0) return;
    e.resize(std::size_t(n), 0.0);
    const double eps = std::numeric_limits<double>::epsilon();
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= eps * dd) break;
            }
            if (m != l) {
                if (iter++ == 50)
                    throw std::runtime_error(
                        "eigen solver: QL iteration did not converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0, c = 1.0, p = 0.0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (int k = 0; k < n; ++k) {
                        double* uk = u.data() + std::size_t(k) * n;
                        f = uk[i + 1];
                        uk[i + 1] = s * uk[i] + c * f;
                        uk[i] = c * uk[i] - s * f;
                    }
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

}  // namespace

void hermitian_eig(const CMatrix& m, std::vector<double>& values,
                   CMatrix& vectors) {
    if (m.rows != m.cols)
        throw std::invalid_argument("eigendecomposition requires a square matrix");
    const int n = m.rows;
    values.assign(std::size_t(n), 0.0);
    vectors = CMatrix::identity(n);
    if (n == 0) return;

    CMatrix t = m;                        // reduced in place to tridiagonal
    CMatrix q = CMatrix::identity(n);     // accumulated unitary

    // Householder reduction: zero everything below the first subdiagonal.
    std::vector<cd> v(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    for (int k = 0; k + 2 < n; ++k) {
        double normsq = 0.0;
        for (int i = k + 1; i < n; ++i) normsq += std::norm(t.at(i, k));
        const double norm = std::sqrt(normsq);
        if (norm == 0.0) continue;
        const cd x0 = t.at(k + 1, k);
        const double ax0 = std::abs(x0);
        const cd phase = ax0 > 0.0 ? x0 / ax0 : cd(1, 0);
        const cd alpha = -phase * norm;

        // v = normalized (x - alpha e1) over rows k+1..n-1
        double vnormsq = 0.0;
        for (int i = k + 1; i < n; ++i) {
            cd ui = t.at(i, k);
            if (i == k + 1) ui -= alpha;
            v[std::size_t(i)] = ui;
            vnormsq += std::norm(ui);
        }
        const double inv = 1.0 / std::sqrt(vnormsq);
        for (int i = k + 1; i < n; ++i) v[std::size_t(i)] *= inv;

        // Column k collapses to alpha exactly.
        t.at(k + 1, k) = alpha;
        t.at(k, k + 1) = std::conj(alpha);
        for (int i = k + 2; i < n; ++i) {
            t.at(i, k) = 0.0;
            t.at(k, i) = 0.0;
        }

        // Rank-2 update of the trailing Hermitian block:
        // B <- B - 2 q v^H - 2 v q^H with q = Bv - (v^H B v) v.
        cd tau(0, 0);
        for (int i = k + 1; i < n; ++i) {
            cd acc(0, 0);
            for (int j = k + 1; j < n; ++j)
                acc += t.at(i, j) * v[std::size_t(j)];
            w[std::size_t(i)] = acc;
            tau += std::conj(v[std::size_t(i)]) * acc;
        }
        for (int i = k + 1; i < n; ++i)
            w[std::size_t(i)] -= tau * v[std::size_t(i)];
        for (int i = k + 1; i < n; ++i) {
            for (int j = k + 1; j < n; ++j) {
                t.at(i, j) -= 2.0 * (w[std::size_t(i)] *
                                         std::conj(v[std::size_t(j)]) +
                                     v[std::size_t(i)] *
                                         std::conj(w[std::size_t(j)]));
            }
        }

        // Q <- Q (I - 2 v v^H)
        for (int r = 0; r < n; ++r) {
            cd acc(0, 0);
            for (int j = k + 1; j < n; ++j)
                acc += q.at(r, j) * v[std::size_t(j)];
            acc *= 2.0;
            for (int j = k + 1; j < n; ++j)
                q.at(r, j) -= acc * std::conj(v[std::size_t(j)]);
        }
    }

    // Make the subdiagonal real with a diagonal phase similarity.
    std::vector<double> d(static_cast<std::size_t>(n)), e(static_cast<std::size_t>(n), 0.0);
    std::vector<cd> colphase(std::size_t(n), cd(1, 0));
    for (int i = 0; i < n; ++i) d[std::size_t(i)] = t.at(i, i).real();
    for (int k = 0; k + 1 < n; ++k) {
        const cd ek = t.at(k + 1, k);
        const double aek = std::abs(ek);
        e[std::size_t(k)] = aek;
        const cd step = aek > 0.0 ? ek / aek : cd(1, 0);
        colphase[std::size_t(k + 1)] = colphase[std::size_t(k)] * step;
    }

    std::vector<double> u(std::size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i) u[std::size_t(i) * n + i] = 1.0;
    tridiag_ql(d, e, n, u);

    // vectors = Q * diag(colphase) * U
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            cd acc(0, 0);
            for (int p = 0; p < n; ++p)
                acc += q.at(i, p) * colphase[std::size_t(p)] *
                       u[std::size_t(p) * n + j];
            vectors.at(i, j) = acc;
        }
    }

    // Sort eigenpairs by descending eigenvalue.
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return d[std::size_t(x)] > d[std::size_t(y)];
    });
    CMatrix sorted(n, n);
    for (int j = 0; j < n; ++j) {
        const int src = order[std::size_t(j)];
        values[std::size_t(j)] = d[std::size_t(src)];
        for (int i = 0; i < n; ++i) sorted.at(i, j) = vectors.at(i, src);
    }

    // Deterministic phase: first significant component real non-negative.
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double mag = std::abs(sorted.at(i, j));
            if (mag > 1e-12) {
                const cd rot = std::conj(sorted.at(i, j)) / mag;
                for (int r = 0; r < n; ++r) sorted.at(r, j) *= rot;
                break;
            }
        }
    }
    vectors = std::move(sorted);
}

CMatrix cholesky(const CMatrix& m) {
    if (m.rows != m.cols)
        throw std::invalid_argument("cholesky requires a square matrix");
    const int n = m.rows;
    CMatrix l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            cd sum = m.at(i, j);
            for (int p = 0; p < j; ++p)
                sum -= l.at(i, p) * std::conj(l.at(j, p));
            if (i == j) {
                const double diag = sum.real();
                if (diag <= 0.0)
                    throw std::runtime_error(
                        "cholesky: matrix is not positive definite");
                l.at(i, j) = std::sqrt(diag);
            } else {
                l.at(i, j) = sum / l.at(j, j).real();
            }
        }
    }
    return l;
}

CMatrix solve_hermitian_shifted(const CMatrix& a, double diag_shift,
                                const CMatrix& b) {
    if (a.rows != a.cols || a.rows != b.rows)
        throw std::invalid_argument("shifted solve dimension mismatch");
    const int n = a.rows;
    CMatrix shifted = a;
    for (int i = 0; i < n; ++i) shifted.at(i, i) += diag_shift;
    const CMatrix l = cholesky(shifted);

    CMatrix x = b;
    // Forward substitution L y = b, column-wise over all right-hand sides.
    for (int c = 0; c < b.cols; ++c) {
        for (int i = 0; i < n; ++i) {
            cd sum = x.at(i, c);
            for (int p = 0; p < i; ++p) sum -= l.at(i, p) * x.at(p, c);
            x.at(i, c) = sum / l.at(i, i).real();
        }
        // Back substitution L^H x = y.
        for (int i = n - 1; i >= 0; --i) {
            cd sum = x.at(i, c);
            for (int p = i + 1; p < n; ++p)
                sum -= std::conj(l.at(p, i)) * x.at(p, c);
            x.at(i, c) = sum / l.at(i, i).real();
        }
    }
    return x;
}

void qr_thin(const CMatrix& a, CMatrix& q, CMatrix& r) {
    const int m = a.rows, n = a.cols;
    if (m < n) throw std::invalid_argument("thin QR requires rows >= cols");
    CMatrix work = a;
    CMatrix qfull = CMatrix::identity(m);
    std::vector<cd> v(static_cast<std::size_t>(m));

    for (int k = 0; k < n; ++k) {
        double normsq = 0.0;
        for (int i = k; i < m; ++i) normsq += std::norm(work.at(i, k));
        const double norm = std::sqrt(normsq);
        if (norm == 0.0) continue;
        const cd x0 = work.at(k, k);
        const double ax0 = std::abs(x0);
        const cd phase = ax0 > 0.0 ? x0 / ax0 : cd(1, 0);
        const cd alpha = -phase * norm;

        double vnormsq = 0.0;
        for (int i = k; i < m; ++i) {
            cd ui = work.at(i, k);
            if (i == k) ui -= alpha;
            v[std::size_t(i)] = ui;
            vnormsq += std::norm(ui);
        }
        if (vnormsq == 0.0) continue;
        const double inv = 1.0 / std::sqrt(vnormsq);
        for (int i = k; i < m; ++i) v[std::size_t(i)] *= inv;

        // work <- (I - 2 v v^H) work on columns k..n-1
        for (int c = k; c < n; ++c) {
            cd acc(0, 0);
            for (int i = k; i < m; ++i)
                acc += std::conj(v[std::size_t(i)]) * work.at(i, c);
            acc *= 2.0;
            for (int i = k; i < m; ++i)
                work.at(i, c) -= acc * v[std::size_t(i)];
        }
        // qfull <- qfull (I - 2 v v^H)
        for (int rr = 0; rr < m; ++rr) {
            cd acc(0, 0);
            for (int i = k; i < m; ++i)
                acc += qfull.at(rr, i) * v[std::size_t(i)];
            acc *= 2.0;
            for (int i = k; i < m; ++i)
                qfull.at(rr, i) -= acc * std::conj(v[std::size_t(i)]);
        }
    }

    q = CMatrix(m, n);
    r = CMatrix(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) r.at(i, j) = work.at(i, j);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) q.at(i, j) = qfull.at(i, j);

    // Absorb phases so the R diagonal is real and non-negative.
    for (int j = 0; j < n; ++j) {
        const cd d = r.at(j, j);
        const double ad = std::abs(d);
        if (ad == 0.0) continue;
        const cd rot = std::conj(d) / ad;
        for (int c = j; c < n; ++c) r.at(j, c) *= rot;
        for (int i = 0; i < m; ++i) q.at(i, j) *= std::conj(rot);
    }
}

}  // namespace crosslink
