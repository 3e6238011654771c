#include "ergolab/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace ergolab::simd {
namespace {

Backend detect() {
    if (const char* env = std::getenv("ERGOLAB_SIMD"); env != nullptr && std::string(env) == "scalar")
        return Backend::Scalar;
#if defined(ERGOLAB_HAVE_AVX2)
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2")) return Backend::Avx2;
#endif
#if defined(__aarch64__)
    return Backend::Neon;
#endif
    return Backend::Scalar;
}

std::atomic<Backend>& selected() {
    static std::atomic<Backend> backend{detect()};
    return backend;
}

}  // namespace

bool available(Backend backend) {
    switch (backend) {
        case Backend::Scalar:
            return true;
        case Backend::Avx2:
#if defined(ERGOLAB_HAVE_AVX2)
            __builtin_cpu_init();
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
        case Backend::Neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& kernels(Backend backend) {
    if (!available(backend))
        throw std::runtime_error("simd backend not available: " + std::string(backend_name(backend)));
    switch (backend) {
#if defined(ERGOLAB_HAVE_AVX2)
        case Backend::Avx2:
            return detail::avx2_table;
#endif
#if defined(__aarch64__)
        case Backend::Neon:
            return detail::neon_table;
#endif
        default:
            return detail::scalar_table;
    }
}

const KernelTable& kernels() { return kernels(selected().load(std::memory_order_relaxed)); }

void force_backend(Backend backend) {
    if (!available(backend))
        throw std::runtime_error("simd backend not available: " + std::string(backend_name(backend)));
    selected().store(backend);
}

void reset_backend() { selected().store(detect()); }

Backend active_backend() { return selected().load(std::memory_order_relaxed); }

std::string_view backend_name(Backend backend) {
    switch (backend) {
        case Backend::Scalar:
            return "scalar";
        case Backend::Avx2:
            return "avx2";
        case Backend::Neon:
            return "neon";
    }
    return "unknown";
}

}  // namespace ergolab::simd
