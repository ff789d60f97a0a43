// AVX2+FMA backend.  This translation unit is compiled with -mavx2 -mfma and
// must only be entered through the dispatch table after the CPU check in
// kernels.cpp, so the rest of the binary stays runnable on older x86-64.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstring>

#include "crosslink/simd/kernels.hpp"

namespace crosslink::simd::detail {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// Row-wise broadcast/FMA update shared by gemm_nn and gemm_tn:
// c_row[0..n) += s * b_row[0..n)
inline void fma_row(double s, const double* b_row, double* c_row, int n) {
    const __m256d vs = _mm256_set1_pd(s);
    int j = 0;
    for (; j + 8 <= n; j += 8) {
        __m256d c0 = _mm256_loadu_pd(c_row + j);
        __m256d c1 = _mm256_loadu_pd(c_row + j + 4);
        c0 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(b_row + j), c0);
        c1 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(b_row + j + 4), c1);
        _mm256_storeu_pd(c_row + j, c0);
        _mm256_storeu_pd(c_row + j + 4, c1);
    }
    for (; j + 4 <= n; j += 4) {
        __m256d c0 = _mm256_loadu_pd(c_row + j);
        c0 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(b_row + j), c0);
        _mm256_storeu_pd(c_row + j, c0);
    }
    for (; j < n; ++j) c_row[j] += s * b_row[j];
}

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * std::size_t(m) * n);
    for (int i = 0; i < m; ++i) {
        const double* ai = a + std::size_t(i) * k;
        double* ci = c + std::size_t(i) * n;
        for (int p = 0; p < k; ++p)
            fma_row(ai[p], b + std::size_t(p) * n, ci, n);
    }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + std::size_t(i) * k;
        double* ci = c + std::size_t(i) * n;
        int j = 0;
        // Four output columns per pass share the loads of the A row.
        for (; j + 4 <= n; j += 4) {
            const double* b0 = b + std::size_t(j) * k;
            const double* b1 = b0 + k;
            const double* b2 = b1 + k;
            const double* b3 = b2 + k;
            __m256d acc0 = _mm256_setzero_pd();
            __m256d acc1 = _mm256_setzero_pd();
            __m256d acc2 = _mm256_setzero_pd();
            __m256d acc3 = _mm256_setzero_pd();
            int p = 0;
            for (; p + 4 <= k; p += 4) {
                const __m256d av = _mm256_loadu_pd(ai + p);
                acc0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + p), acc0);
                acc1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + p), acc1);
                acc2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + p), acc2);
                acc3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + p), acc3);
            }
            double s0 = hsum(acc0), s1 = hsum(acc1), s2 = hsum(acc2),
                   s3 = hsum(acc3);
            for (; p < k; ++p) {
                s0 += ai[p] * b0[p];
                s1 += ai[p] * b1[p];
                s2 += ai[p] * b2[p];
                s3 += ai[p] * b3[p];
            }
            if (accumulate) {
                ci[j] += s0;
                ci[j + 1] += s1;
                ci[j + 2] += s2;
                ci[j + 3] += s3;
            } else {
                ci[j] = s0;
                ci[j + 1] = s1;
                ci[j + 2] = s2;
                ci[j + 3] = s3;
            }
        }
        for (; j < n; ++j) {
            const double* bj = b + std::size_t(j) * k;
            __m256d acc = _mm256_setzero_pd();
            int p = 0;
            for (; p + 4 <= k; p += 4)
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(ai + p),
                                      _mm256_loadu_pd(bj + p), acc);
            double s = hsum(acc);
            for (; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = accumulate ? ci[j] + s : s;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * std::size_t(m) * n);
    for (int p = 0; p < k; ++p) {
        const double* ap = a + std::size_t(p) * m;
        const double* bp = b + std::size_t(p) * n;
        for (int i = 0; i < m; ++i)
            fma_row(ap[i], bp, c + std::size_t(i) * n, n);
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                               acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                               _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                               acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sumsq(const double* x, std::size_t n) { return dot(x, x, n); }

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void add(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(
            y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) y[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(
            y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) y[i] = a[i] * b[i];
}

void relu_fwd(const double* x, double* y, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(const double* x, const double* gy, double* gx, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask =
            _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(gx + i,
                         _mm256_and_pd(mask, _mm256_loadu_pd(gy + i)));
    }
    for (; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
}

}  // namespace

const Kernels avx2_kernels = {
    gemm_nn, gemm_nt, gemm_tn, dot,      sumsq,    axpy,
    scale,   add,     mul,     relu_fwd, relu_bwd,
};

bool cpu_has_avx2_fma() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

}  // namespace crosslink::simd::detail

#endif  // x86-64
