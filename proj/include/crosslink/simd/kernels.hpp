#pragma once

#include <cstddef>
#include <string>

namespace crosslink::simd {

// Double-precision compute kernels used by the layer graphs and the
// per-resource-element link arithmetic.  Every entry point has a scalar
// reference implementation plus vectorized variants (AVX2 on x86-64, NEON on
// aarch64) selected once at startup from CPU capabilities.  The backend can be
// forced with force_backend() or the CROSSLINK_SIMD environment variable
// ("scalar", "avx2", "neon"); equivalence between backends is covered by the
// kernel test suite.
//
// All matrices are dense row-major with no padding.
struct Kernels {
    // C[M,N] = A[M,K] * B[K,N]        (+= when accumulate)
    void (*gemm_nn)(const double* a, const double* b, double* c, int m, int k,
                    int n, bool accumulate);
    // C[M,N] = A[M,K] * B[N,K]^T      (+= when accumulate)
    void (*gemm_nt)(const double* a, const double* b, double* c, int m, int k,
                    int n, bool accumulate);
    // C[M,N] = A[K,M]^T * B[K,N]      (+= when accumulate)
    void (*gemm_tn)(const double* a, const double* b, double* c, int m, int k,
                    int n, bool accumulate);

    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sumsq)(const double* x, std::size_t n);
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    void (*scale)(double a, double* x, std::size_t n);
    void (*add)(const double* a, const double* b, double* y, std::size_t n);
    void (*mul)(const double* a, const double* b, double* y, std::size_t n);
    // y = max(x, 0)
    void (*relu_fwd)(const double* x, double* y, std::size_t n);
    // gx = gy where x > 0 else 0
    void (*relu_bwd)(const double* x, const double* gy, double* gx,
                     std::size_t n);
};

// Kernel table picked for the current process (honors CROSSLINK_SIMD).
const Kernels& active();

// Name of the backend behind active(): "scalar", "avx2" or "neon".
const std::string& active_name();

// Force a specific backend (primarily for the equivalence tests).  Throws
// std::invalid_argument for unknown names and std::runtime_error when the
// requested backend is not available on this machine.
void force_backend(const std::string& name);

// Backends compiled into this binary, e.g. {"scalar", "avx2"}.
const std::string& available_backends();

namespace detail {
extern const Kernels scalar_kernels;
#if defined(__x86_64__) || defined(_M_X64)
extern const Kernels avx2_kernels;
bool cpu_has_avx2_fma();
#endif
#if defined(__ARM_NEON) || defined(__aarch64__)
extern const Kernels neon_kernels;
#endif
}  // namespace detail

}  // namespace crosslink::simd
