// AArch64 variant. Two 2-lane registers stand in for the four canonical lanes.
#include "ergolab/simd/kernels.hpp"

#include <arm_neon.h>

#include <cmath>

namespace ergolab::simd::detail {
namespace {

void axpy(double* out, double w, const double* in, std::size_t n) {
    const float64x2_t wv = vdupq_n_f64(w);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t prod = vmulq_f64(wv, vld1q_f64(in + i));
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(out + i), prod));
    }
    for (; i < n; ++i) {
        double prod = w * in[i];
        out[i] = out[i] + prod;
    }
}

void scale(double* x, double a, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_n_f64(vld1q_f64(x + i), a));
    for (; i < n; ++i) x[i] *= a;
}

void subtract(double* out, const double* a, const double* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

template <class VecTerm, class ScalarTerm>
double lane_reduce(std::size_t n, VecTerm vterm, ScalarTerm sterm) {
    float64x2_t lo = vdupq_n_f64(0.0), hi = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        lo = vaddq_f64(lo, vterm(i));
        hi = vaddq_f64(hi, vterm(i + 2));
    }
    double lane[4];
    vst1q_f64(lane, lo);
    vst1q_f64(lane + 2, hi);
    for (; i < n; ++i) lane[i & 3] += sterm(i);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

inline float64x2_t sq(float64x2_t v) { return vmulq_f64(v, v); }

double sum(const double* x, std::size_t n) {
    return lane_reduce(n, [x](std::size_t i) { return vld1q_f64(x + i); }, [x](std::size_t i) { return x[i]; });
}

double dot(const double* a, const double* b, std::size_t n) {
    return lane_reduce(
        n, [a, b](std::size_t i) { return vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)); },
        [a, b](std::size_t i) { return a[i] * b[i]; });
}

double weighted_abs_sum(const double* x, const double* w, std::size_t n) {
    return lane_reduce(
        n, [x, w](std::size_t i) { return vmulq_f64(vld1q_f64(w + i), vabsq_f64(vld1q_f64(x + i))); },
        [x, w](std::size_t i) { return w[i] * std::fabs(x[i]); });
}

double weighted_sq_sum(const double* x, const double* w, std::size_t n) {
    return lane_reduce(
        n, [x, w](std::size_t i) { return vmulq_f64(vld1q_f64(w + i), sq(vld1q_f64(x + i))); },
        [x, w](std::size_t i) { return w[i] * (x[i] * x[i]); });
}

double max_abs(const double* x, std::size_t n) {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) r = std::fmax(r, std::fabs(x[i]));
    return r;
}

}  // namespace

const KernelTable neon_table{Backend::Neon,    axpy,           scale,   subtract, sum, dot,
                             weighted_abs_sum, weighted_sq_sum, max_abs};

}  // namespace ergolab::simd::detail
