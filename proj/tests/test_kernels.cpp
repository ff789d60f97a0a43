#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "crosslink/rng.hpp"
#include "crosslink/simd/kernels.hpp"

using crosslink::Rng;
namespace simd = crosslink::simd;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("scalar gemm_nn matches a hand-computed product") {
    // A = [[1,2],[3,4]], B = [[5,6],[7,8]] -> AB = [[19,22],[43,50]]
    const std::vector<double> a = {1, 2, 3, 4};
    const std::vector<double> b = {5, 6, 7, 8};
    std::vector<double> c(4, -1.0);
    simd::detail::scalar_kernels.gemm_nn(a.data(), b.data(), c.data(), 2, 2, 2,
                                         false);
    CHECK(c[0] == doctest::Approx(19));
    CHECK(c[1] == doctest::Approx(22));
    CHECK(c[2] == doctest::Approx(43));
    CHECK(c[3] == doctest::Approx(50));

    // accumulate=true adds on top of the existing contents
    simd::detail::scalar_kernels.gemm_nn(a.data(), b.data(), c.data(), 2, 2, 2,
                                         true);
    CHECK(c[0] == doctest::Approx(38));
    CHECK(c[3] == doctest::Approx(100));
}

TEST_CASE("scalar gemm_nt and gemm_tn agree with explicit transposition") {
    Rng rng(11);
    const int m = 5, k = 7, n = 3;
    const auto a = random_vec(rng, std::size_t(m) * k);   // [m,k]
    const auto b = random_vec(rng, std::size_t(n) * k);   // [n,k]
    const auto at = random_vec(rng, std::size_t(k) * m);  // [k,m]
    const auto bn = random_vec(rng, std::size_t(k) * n);  // [k,n]

    // gemm_nt: C = A * B^T, checked element-wise against dot products.
    std::vector<double> c(std::size_t(m) * n);
    simd::detail::scalar_kernels.gemm_nt(a.data(), b.data(), c.data(), m, k, n,
                                         false);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double ref = 0.0;
            for (int p = 0; p < k; ++p) ref += a[i * k + p] * b[j * k + p];
            CHECK(c[i * n + j] == doctest::Approx(ref).epsilon(1e-13));
        }

    // gemm_tn: C = A^T * B.
    std::vector<double> d(std::size_t(m) * n);
    simd::detail::scalar_kernels.gemm_tn(at.data(), bn.data(), d.data(), m, k,
                                         n, false);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double ref = 0.0;
            for (int p = 0; p < k; ++p) ref += at[p * m + i] * bn[p * n + j];
            CHECK(d[i * n + j] == doctest::Approx(ref).epsilon(1e-13));
        }
}

TEST_CASE("elementwise scalar kernels match their definitions") {
    const auto& k = simd::detail::scalar_kernels;
    const std::vector<double> x = {-2.0, -0.5, 0.0, 0.5, 3.0};
    const std::vector<double> y = {1.0, 2.0, 3.0, 4.0, 5.0};
    std::vector<double> out(5);

    k.relu_fwd(x.data(), out.data(), 5);
    CHECK(out == std::vector<double>{0.0, 0.0, 0.0, 0.5, 3.0});

    k.relu_bwd(x.data(), y.data(), out.data(), 5);
    CHECK(out == std::vector<double>{0.0, 0.0, 0.0, 4.0, 5.0});

    CHECK(k.dot(x.data(), y.data(), 5) == doctest::Approx(-2 - 1 + 2 + 15));
    CHECK(k.sumsq(x.data(), 5) == doctest::Approx(4 + 0.25 + 0.25 + 9));

    out = y;
    k.axpy(2.0, x.data(), out.data(), 5);
    CHECK(out == std::vector<double>{-3.0, 1.0, 3.0, 5.0, 11.0});

    out = y;
    k.scale(-1.0, out.data(), 5);
    CHECK(out == std::vector<double>{-1.0, -2.0, -3.0, -4.0, -5.0});

    k.add(x.data(), y.data(), out.data(), 5);
    CHECK(out == std::vector<double>{-1.0, 1.5, 3.0, 4.5, 8.0});

    k.mul(x.data(), y.data(), out.data(), 5);
    CHECK(out == std::vector<double>{-2.0, -1.0, 0.0, 2.0, 15.0});
}

#if defined(__x86_64__) || defined(_M_X64)
TEST_CASE("avx2 kernels are equivalent to the scalar reference") {
    if (!simd::detail::cpu_has_avx2_fma()) {
        MESSAGE("CPU lacks AVX2+FMA; equivalence covered elsewhere");
        return;
    }
    const auto& sc = simd::detail::scalar_kernels;
    const auto& vx = simd::detail::avx2_kernels;
    Rng rng(77);

    // Sizes chosen to exercise both the unrolled body and the remainders.
    const std::vector<std::array<int, 3>> shapes = {
        {1, 1, 1}, {3, 5, 7}, {8, 16, 8}, {13, 33, 17}, {16, 256, 64}};
    for (const auto& [m, k, n] : shapes) {
        const auto a = random_vec(rng, std::size_t(m) * k);
        const auto b_kn = random_vec(rng, std::size_t(k) * n);
        const auto b_nk = random_vec(rng, std::size_t(n) * k);
        const auto a_km = random_vec(rng, std::size_t(k) * m);
        std::vector<double> c0(std::size_t(m) * n), c1(c0);

        sc.gemm_nn(a.data(), b_kn.data(), c0.data(), m, k, n, false);
        vx.gemm_nn(a.data(), b_kn.data(), c1.data(), m, k, n, false);
        CHECK(max_abs_diff(c0, c1) < 1e-12);

        sc.gemm_nt(a.data(), b_nk.data(), c0.data(), m, k, n, false);
        vx.gemm_nt(a.data(), b_nk.data(), c1.data(), m, k, n, false);
        CHECK(max_abs_diff(c0, c1) < 1e-12);

        sc.gemm_tn(a_km.data(), b_kn.data(), c0.data(), m, k, n, false);
        vx.gemm_tn(a_km.data(), b_kn.data(), c1.data(), m, k, n, false);
        CHECK(max_abs_diff(c0, c1) < 1e-12);
    }

    for (std::size_t n : {1u, 4u, 7u, 64u, 1000u}) {
        const auto x = random_vec(rng, n);
        const auto y = random_vec(rng, n);
        CHECK(sc.dot(x.data(), y.data(), n) ==
              doctest::Approx(vx.dot(x.data(), y.data(), n)).epsilon(1e-12));
        CHECK(sc.sumsq(x.data(), n) ==
              doctest::Approx(vx.sumsq(x.data(), n)).epsilon(1e-12));

        std::vector<double> y0 = y, y1 = y;
        sc.axpy(0.37, x.data(), y0.data(), n);
        vx.axpy(0.37, x.data(), y1.data(), n);
        CHECK(max_abs_diff(y0, y1) < 1e-14);

        std::vector<double> r0(n), r1(n);
        sc.relu_fwd(x.data(), r0.data(), n);
        vx.relu_fwd(x.data(), r1.data(), n);
        CHECK(max_abs_diff(r0, r1) == 0.0);

        sc.relu_bwd(x.data(), y.data(), r0.data(), n);
        vx.relu_bwd(x.data(), y.data(), r1.data(), n);
        CHECK(max_abs_diff(r0, r1) == 0.0);

        sc.add(x.data(), y.data(), r0.data(), n);
        vx.add(x.data(), y.data(), r1.data(), n);
        CHECK(max_abs_diff(r0, r1) == 0.0);

        sc.mul(x.data(), y.data(), r0.data(), n);
        vx.mul(x.data(), y.data(), r1.data(), n);
        CHECK(max_abs_diff(r0, r1) == 0.0);

        y0 = y;
        y1 = y;
        sc.scale(-2.5, y0.data(), n);
        vx.scale(-2.5, y1.data(), n);
        CHECK(max_abs_diff(y0, y1) == 0.0);
    }
}
#endif

TEST_CASE("backend selection reports a valid table and honors forcing") {
    CHECK(simd::available_backends().find("scalar") != std::string::npos);
    simd::force_backend("scalar");
    CHECK(simd::active_name() == "scalar");
    CHECK(simd::active().gemm_nn == simd::detail::scalar_kernels.gemm_nn);
    CHECK_THROWS_AS(simd::force_backend("sse999"), std::invalid_argument);
#if defined(__x86_64__) || defined(_M_X64)
    if (simd::detail::cpu_has_avx2_fma()) {
        simd::force_backend("avx2");
        CHECK(simd::active_name() == "avx2");
    }
#endif
}
