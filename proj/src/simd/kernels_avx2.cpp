// Compiled with -mavx2; only reached after a runtime CPU check.
#include "ergolab/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace ergolab::simd::detail {
namespace {

inline __m256d abs_pd(__m256d v) {
    return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

void axpy(double* out, double w, const double* in, std::size_t n) {
    const __m256d wv = _mm256_set1_pd(w);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d prod = _mm256_mul_pd(wv, _mm256_loadu_pd(in + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(out + i), prod));
    }
    for (; i < n; ++i) {
        double prod = w * in[i];
        out[i] = out[i] + prod;
    }
}

void scale(double* x, double a, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), av));
    for (; i < n; ++i) x[i] *= a;
}

void subtract(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

// Vector lanes map one-to-one onto the scalar lanes; the tail continues the
// same lane assignment before the final fold.
template <class VecTerm, class ScalarTerm>
double lane_reduce(std::size_t n, VecTerm vterm, ScalarTerm sterm) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, vterm(i));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    for (; i < n; ++i) lane[i & 3] += sterm(i);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double sum(const double* x, std::size_t n) {
    return lane_reduce(
        n, [x](std::size_t i) { return _mm256_loadu_pd(x + i); }, [x](std::size_t i) { return x[i]; });
}

double dot(const double* a, const double* b, std::size_t n) {
    return lane_reduce(
        n, [a, b](std::size_t i) { return _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)); },
        [a, b](std::size_t i) { return a[i] * b[i]; });
}

double weighted_abs_sum(const double* x, const double* w, std::size_t n) {
    return lane_reduce(
        n,
        [x, w](std::size_t i) { return _mm256_mul_pd(_mm256_loadu_pd(w + i), abs_pd(_mm256_loadu_pd(x + i))); },
        [x, w](std::size_t i) { return w[i] * std::fabs(x[i]); });
}

double weighted_sq_sum(const double* x, const double* w, std::size_t n) {
    return lane_reduce(
        n,
        [x, w](std::size_t i) {
            __m256d v = _mm256_loadu_pd(x + i);
            return _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_mul_pd(v, v));
        },
        [x, w](std::size_t i) { return w[i] * (x[i] * x[i]); });
}

double max_abs(const double* x, std::size_t n) {
    __m256d m = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) m = _mm256_max_pd(m, abs_pd(_mm256_loadu_pd(x + i)));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, m);
    double r = std::fmax(std::fmax(lane[0], lane[1]), std::fmax(lane[2], lane[3]));
    for (; i < n; ++i) r = std::fmax(r, std::fabs(x[i]));
    return r;
}

}  // namespace

const KernelTable avx2_table{Backend::Avx2,    axpy,           scale,   subtract, sum, dot,
                             weighted_abs_sum, weighted_sq_sum, max_abs};

}  // namespace ergolab::simd::detail
