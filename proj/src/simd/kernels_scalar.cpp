#include "crosslink/simd/kernels.hpp"

#include <algorithm>
#include <cstring>

// Reference implementations.  Kept deliberately straight-line: these define
// the semantics the vectorized backends are tested against.

namespace crosslink::simd::detail {
namespace {

void gemm_nn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * std::size_t(m) * n);
    for (int i = 0; i < m; ++i) {
        const double* ai = a + std::size_t(i) * k;
        double* ci = c + std::size_t(i) * n;
        for (int p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b + std::size_t(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void gemm_nt(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + std::size_t(i) * k;
        double* ci = c + std::size_t(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + std::size_t(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = accumulate ? ci[j] + acc : acc;
        }
    }
}

void gemm_tn(const double* a, const double* b, double* c, int m, int k, int n,
             bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(double) * std::size_t(m) * n);
    for (int p = 0; p < k; ++p) {
        const double* ap = a + std::size_t(p) * m;
        const double* bp = b + std::size_t(p) * n;
        for (int i = 0; i < m; ++i) {
            const double api = ap[i];
            double* ci = c + std::size_t(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
        }
    }
}

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sumsq(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void add(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void relu_fwd(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(const double* x, const double* gy, double* gx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
}

}  // namespace

const Kernels scalar_kernels = {
    gemm_nn, gemm_nt, gemm_tn, dot,      sumsq,    axpy,
    scale,   add,     mul,     relu_fwd, relu_bwd,
};

}  // namespace crosslink::simd::detail
