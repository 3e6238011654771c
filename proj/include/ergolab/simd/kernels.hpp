#pragma once
// Data-parallel inner loops used by the averaging, norm and distribution code.
//
// Every kernel exists as a scalar reference and as vector variants (AVX2 on
// x86-64, NEON on AArch64).  The active variant is picked once at runtime from
// the CPU feature bits and can be overridden for equivalence testing.
//
// All variants produce bit-identical results: element-wise kernels use a
// separate multiply and add (no FMA contraction), and reductions use one
// canonical order -- four interleaved lanes, lane k accumulating the elements
// with index = k (mod 4) in increasing order, folded as (l0 + l1) + (l2 + l3).

#include <cstddef>
#include <string_view>

namespace ergolab::simd {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
    Backend backend;
    /// out[i] += w * in[i]
    void (*axpy)(double* out, double w, const double* in, std::size_t n);
    /// x[i] *= a
    void (*scale)(double* x, double a, std::size_t n);
    /// out[i] = a[i] - b[i]
    void (*subtract)(double* out, const double* a, const double* b, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    /// sum_i w[i] * |x[i]|
    double (*weighted_abs_sum)(const double* x, const double* w, std::size_t n);
    /// sum_i w[i] * x[i]^2
    double (*weighted_sq_sum)(const double* x, const double* w, std::size_t n);
    double (*max_abs)(const double* x, std::size_t n);
};

/// Kernel table of the currently selected backend.
const KernelTable& kernels();

/// Kernel table of a specific backend; throws if it is not compiled in or the
/// CPU lacks the instructions.
const KernelTable& kernels(Backend backend);

bool available(Backend backend);

/// Selects the backend used by kernels(). Throws if unavailable.
void force_backend(Backend backend);

/// Restores the automatically detected backend.
void reset_backend();

Backend active_backend();

std::string_view backend_name(Backend backend);

namespace detail {
extern const KernelTable scalar_table;
#if defined(ERGOLAB_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(__aarch64__)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace ergolab::simd
