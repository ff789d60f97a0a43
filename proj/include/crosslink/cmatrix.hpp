#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace crosslink {

using cd = std::complex<double>;

// Dense row-major complex matrix sized for per-resource-element link math
// (antenna-count dimensions, typically <= 32).
struct CMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<cd> a;

    CMatrix() = default;
    CMatrix(int r, int c) : rows(r), cols(c), a(std::size_t(r) * c, cd(0, 0)) {}

    static CMatrix identity(int n) {
        CMatrix m(n, n);
        for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
        return m;
    }

    cd& at(int r, int c) { return a[std::size_t(r) * cols + c]; }
    const cd& at(int r, int c) const { return a[std::size_t(r) * cols + c]; }

    CMatrix adjoint() const;                     // conjugate transpose
    CMatrix operator*(const CMatrix& rhs) const; // matrix product
    CMatrix operator+(const CMatrix& rhs) const;
    CMatrix operator-(const CMatrix& rhs) const;
    CMatrix& operator*=(cd s);
    CMatrix& operator+=(const CMatrix& rhs);

    // A^H * B without forming the adjoint.
    CMatrix adjoint_times(const CMatrix& rhs) const;

    double frobenius_sq() const;
    std::vector<cd> col(int c) const;
};

std::vector<cd> mat_vec(const CMatrix& m, const std::vector<cd>& v);

// Eigendecomposition of a Hermitian matrix: fills `values` (descending) and
// the columns of `vectors` with the matching orthonormal eigenvectors.  Each
// eigenvector is phase-normalized so its first component of magnitude above
// 1e-12 is real and non-negative, making the output deterministic.
// Householder tridiagonalization followed by implicit-shift QL; throws
// std::runtime_error if the QL sweep fails to converge.
void hermitian_eig(const CMatrix& m, std::vector<double>& values,
                   CMatrix& vectors);

// Cholesky factor L (lower, real positive diagonal) of a Hermitian
// positive-definite matrix.  Throws std::runtime_error when the matrix is not
// positive definite.
CMatrix cholesky(const CMatrix& m);

// Solves (A + diag_shift * I) X = B for Hermitian positive semidefinite A with
// diag_shift > 0, via Cholesky.
CMatrix solve_hermitian_shifted(const CMatrix& a, double diag_shift,
                                const CMatrix& b);

// Thin QR factorization A = Q R for rows >= cols, with Q (rows x cols) having
// orthonormal columns and R (cols x cols) upper triangular with real
// non-negative diagonal.
void qr_thin(const CMatrix& a, CMatrix& q, CMatrix& r);

}  // namespace crosslink
