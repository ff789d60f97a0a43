#include "crosslink/simd/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace crosslink::simd {
namespace {

struct Backend {
    const Kernels* table;
    std::string name;
};

Backend pick_default() {
#if defined(__x86_64__) || defined(_M_X64)
    if (detail::cpu_has_avx2_fma()) return {&detail::avx2_kernels, "avx2"};
#endif
#if defined(__ARM_NEON) || defined(__aarch64__)
    return {&detail::neon_kernels, "neon"};
#endif
    return {&detail::scalar_kernels, "scalar"};
}

Backend resolve(const std::string& name) {
    if (name == "scalar") return {&detail::scalar_kernels, "scalar"};
    if (name == "avx2") {
#if defined(__x86_64__) || defined(_M_X64)
        if (detail::cpu_has_avx2_fma()) return {&detail::avx2_kernels, "avx2"};
        throw std::runtime_error("avx2 backend requested but CPU lacks AVX2/FMA");
#else
        throw std::runtime_error("avx2 backend requested on non-x86 build");
#endif
    }
    if (name == "neon") {
#if defined(__ARM_NEON) || defined(__aarch64__)
        return {&detail::neon_kernels, "neon"};
#else
        throw std::runtime_error("neon backend requested on non-ARM build");
#endif
    }
    throw std::invalid_argument("unknown kernel backend: " + name);
}

Backend& state() {
    static Backend current = [] {
        if (const char* env = std::getenv("CROSSLINK_SIMD"); env && *env)
            return resolve(env);
        return pick_default();
    }();
    return current;
}

}  // namespace

const Kernels& active() { return *state().table; }

const std::string& active_name() { return state().name; }

void force_backend(const std::string& name) { state() = resolve(name); }

const std::string& available_backends() {
    static const std::string list = [] {
        std::string s = "scalar";
#if defined(__x86_64__) || defined(_M_X64)
        if (detail::cpu_has_avx2_fma()) s += ",avx2";
#endif
#if defined(__ARM_NEON) || defined(__aarch64__)
        s += ",neon";
#endif
        return s;
    }();
    return list;
}

}  // namespace crosslink::simd
