// NEON backend for aarch64 (2-wide double lanes).  Mirrors the scalar
// reference semantics; only built on ARM targets.

#if defined(__ARM_NEON) || defined(__aarch64__)

#include <arm_neon.h>

#include <cstring>

#include "crosslink/simd/kernels.hpp"

namespace crosslink::simd::detail {
namespace {

inline void fma_row(double s, const double* b_row, double* c_row, int n) {
    const float64x2_t vs = vdupq_n_f64(s);
    int j = 0;
    for (; j + 2 <= n; j += 2) {
        float64x2_t cv = vld1q_f64(c_row + j);
        cv = vfmaq_f64(cv, vs, vld1q_f64(b_row + j));
        vst1q_f64(c_row + j, cv);
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
        for (int j = 0; j < n; ++j) {
            const double* bj = b + std::size_t(j) * k;
            float64x2_t acc = vdupq_n_f64(0.0);
            int p = 0;
            for (; p + 2 <= k; p += 2)
                acc = vfmaq_f64(acc, vld1q_f64(ai + p), vld1q_f64(bj + p));
            double s = vaddvq_f64(acc);
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
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double sumsq(const double* x, std::size_t n) { return dot(x, x, n); }

void axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t yv = vld1q_f64(y + i);
        yv = vfmaq_f64(yv, va, vld1q_f64(x + i));
        vst1q_f64(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void add(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) y[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) y[i] = a[i] * b[i];
}

void relu_fwd(const double* x, double* y, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vmaxq_f64(zero, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(const double* x, const double* gy, double* gx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
}

}  // namespace

const Kernels neon_kernels = {
    gemm_nn, gemm_nt, gemm_tn, dot,      sumsq,    axpy,
    scale,   add,     mul,     relu_fwd, relu_bwd,
};

}  // namespace crosslink::simd::detail

#endif  // ARM
