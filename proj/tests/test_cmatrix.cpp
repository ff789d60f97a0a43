#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crosslink/cmatrix.hpp"
#include "crosslink/rng.hpp"

using crosslink::cd;
using crosslink::CMatrix;
using crosslink::Rng;

namespace {

CMatrix random_matrix(Rng& rng, int r, int c) {
    CMatrix m(r, c);
    for (auto& v : m.a) v = rng.cnormal(1.0);
    return m;
}

CMatrix random_hermitian(Rng& rng, int n) {
    CMatrix g = random_matrix(rng, n, n);
    CMatrix h(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            h.at(i, j) = 0.5 * (g.at(i, j) + std::conj(g.at(j, i)));
    return h;
}

double max_entry(const CMatrix& m) {
    double mx = 0.0;
    for (const auto& v : m.a) mx = std::max(mx, std::abs(v));
    return mx;
}

}  // namespace

TEST_CASE("matrix product against hand computation") {
    CMatrix a(2, 2), b(2, 2);
    a.at(0, 0) = {1, 1};
    a.at(0, 1) = {0, 2};
    a.at(1, 0) = {3, 0};
    a.at(1, 1) = {1, -1};
    b.at(0, 0) = {2, 0};
    b.at(0, 1) = {0, 1};
    b.at(1, 0) = {1, 0};
    b.at(1, 1) = {1, 1};
    const CMatrix c = a * b;
    // (1+i)(2) + (2i)(1) = 2 + 4i
    CHECK(std::abs(c.at(0, 0) - cd(2, 4)) < 1e-15);
    // (1+i)(i) + (2i)(1+i) = i - 1 + 2i - 2 = -3 + 3i
    CHECK(std::abs(c.at(0, 1) - cd(-3, 3)) < 1e-15);
    // (3)(2) + (1-i)(1) = 7 - i
    CHECK(std::abs(c.at(1, 0) - cd(7, -1)) < 1e-15);
    // (3)(i) + (1-i)(1+i) = 2 + 3i
    CHECK(std::abs(c.at(1, 1) - cd(2, 3)) < 1e-15);
}

TEST_CASE("adjoint_times equals forming the adjoint explicitly") {
    Rng rng(3);
    const CMatrix a = random_matrix(rng, 5, 3);
    const CMatrix b = random_matrix(rng, 5, 4);
    const CMatrix direct = a.adjoint() * b;
    const CMatrix fused = a.adjoint_times(b);
    CHECK(max_entry(direct - fused) < 1e-13);
}

TEST_CASE("eigendecomposition of a known 2x2 Hermitian matrix") {
    // [[2, i], [-i, 2]] has eigenvalues 3 and 1.
    CMatrix m(2, 2);
    m.at(0, 0) = 2.0;
    m.at(0, 1) = {0, 1};
    m.at(1, 0) = {0, -1};
    m.at(1, 1) = 2.0;
    std::vector<double> vals;
    CMatrix vecs;
    crosslink::hermitian_eig(m, vals, vecs);
    REQUIRE(vals.size() == 2);
    CHECK(vals[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(vals[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("eigendecomposition reconstructs random Hermitian matrices") {
    Rng rng(9);
    for (int n : {1, 2, 3, 4, 8, 16}) {
        const CMatrix m = random_hermitian(rng, n);
        std::vector<double> vals;
        CMatrix v;
        crosslink::hermitian_eig(m, vals, v);

        // Orthonormal eigenvectors.
        const CMatrix gram = v.adjoint_times(v);
        CHECK(max_entry(gram - CMatrix::identity(n)) < 1e-10);

        // M V = V diag(vals).
        CMatrix vl = v;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) vl.at(i, j) *= vals[std::size_t(j)];
        CHECK(max_entry(m * v - vl) < 1e-9);

        // Descending order.
        for (std::size_t j = 1; j < vals.size(); ++j)
            CHECK(vals[j - 1] >= vals[j] - 1e-12);

        // Deterministic phase: first significant entry real non-negative.
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                if (std::abs(v.at(i, j)) > 1e-12) {
                    CHECK(std::abs(v.at(i, j).imag()) < 1e-10);
                    CHECK(v.at(i, j).real() >= 0.0);
                    break;
                }
            }
        }
    }
}

TEST_CASE("gram matrices have non-negative eigenvalues") {
    Rng rng(21);
    const CMatrix g = random_matrix(rng, 6, 4);
    const CMatrix psd = g.adjoint_times(g);  // 4x4 PSD
    std::vector<double> vals;
    CMatrix v;
    crosslink::hermitian_eig(psd, vals, v);
    for (double lam : vals) CHECK(lam >= -1e-10);
}

TEST_CASE("repeated eigenvalues are handled (identity and diagonal)") {
    std::vector<double> vals;
    CMatrix v;
    crosslink::hermitian_eig(CMatrix::identity(4), vals, v);
    for (double lam : vals) CHECK(lam == doctest::Approx(1.0));
    const CMatrix gram = v.adjoint_times(v);
    CHECK(max_entry(gram - CMatrix::identity(4)) < 1e-12);
}

TEST_CASE("cholesky factor reproduces the matrix") {
    Rng rng(31);
    const CMatrix g = random_matrix(rng, 5, 5);
    CMatrix m = g * g.adjoint();
    for (int i = 0; i < 5; ++i) m.at(i, i) += 0.5;  // safely positive definite
    const CMatrix l = crosslink::cholesky(m);
    CHECK(max_entry(l * l.adjoint() - m) < 1e-11);
    for (int i = 0; i < 5; ++i) {
        CHECK(l.at(i, i).imag() == 0.0);
        CHECK(l.at(i, i).real() > 0.0);
        for (int j = i + 1; j < 5; ++j) CHECK(std::abs(l.at(i, j)) == 0.0);
    }
}

TEST_CASE("cholesky rejects an indefinite matrix") {
    CMatrix m = CMatrix::identity(2);
    m.at(1, 1) = -1.0;
    CHECK_THROWS_AS(crosslink::cholesky(m), std::runtime_error);
}

TEST_CASE("shifted Hermitian solve leaves a tiny residual") {
    Rng rng(37);
    const CMatrix g = random_matrix(rng, 4, 6);
    const CMatrix a = g * g.adjoint();  // 4x4 PSD
    const CMatrix b = random_matrix(rng, 4, 3);
    const double shift = 0.01;
    const CMatrix x = crosslink::solve_hermitian_shifted(a, shift, b);
    CMatrix shifted = a;
    for (int i = 0; i < 4; ++i) shifted.at(i, i) += shift;
    CHECK(max_entry(shifted * x - b) < 1e-10);
}

TEST_CASE("thin QR factorizes tall matrices") {
    Rng rng(41);
    for (auto [m, n] : {std::pair{6, 4}, std::pair{4, 4}, std::pair{8, 2}}) {
        const CMatrix a = random_matrix(rng, m, n);
        CMatrix q, r;
        crosslink::qr_thin(a, q, r);
        CHECK(max_entry(q * r - a) < 1e-12);
        CHECK(max_entry(q.adjoint_times(q) - CMatrix::identity(n)) < 1e-12);
        for (int i = 0; i < n; ++i) {
            CHECK(r.at(i, i).imag() == doctest::Approx(0.0));
            CHECK(r.at(i, i).real() >= 0.0);
            for (int j = 0; j < i; ++j) CHECK(std::abs(r.at(i, j)) == 0.0);
        }
    }
}

TEST_CASE("eigensolver input validation") {
    std::vector<double> vals;
    CMatrix v;
    CHECK_THROWS_AS(crosslink::hermitian_eig(CMatrix(2, 3), vals, v),
                    std::invalid_argument);
}
