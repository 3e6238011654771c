#include "ergolab/simd/kernels.hpp"

#include <cmath>

namespace ergolab::simd::detail {
namespace {

void axpy(double* out, double w, const double* in, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double prod = w * in[i];
        out[i] = out[i] + prod;
    }
}

void scale(double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void subtract(double* out, const double* a, const double* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

// Lane k owns indices i = k (mod 4); see the header for the canonical order.
template <class Term>
double lane_reduce(std::size_t n, Term term) {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) lane[i & 3] += term(i);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

double sum(const double* x, std::size_t n) {
    return lane_reduce(n, [x](std::size_t i) { return x[i]; });
}

double dot(const double* a, const double* b, std::size_t n) {
    return lane_reduce(n, [a, b](std::size_t i) { return a[i] * b[i]; });
}

double weighted_abs_sum(const double* x, const double* w, std::size_t n) {
    return lane_reduce(n, [x, w](std::size_t i) { return w[i] * std::fabs(x[i]); });
}

double weighted_sq_sum(const double* x, const double* w, std::size_t n) {
    return lane_reduce(n, [x, w](std::size_t i) { return w[i] * (x[i] * x[i]); });
}

double max_abs(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(x[i]));
    return m;
}

}  // namespace

const KernelTable scalar_table{Backend::Scalar, axpy,     scale,           subtract, sum, dot,
                               weighted_abs_sum, weighted_sq_sum, max_abs};

}  // namespace ergolab::simd::detail
