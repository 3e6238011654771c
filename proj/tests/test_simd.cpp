#include <doctest.h>

#include <cstring>
#include <vector>

#include "ergolab/averaging.hpp"
#include "ergolab/simd/kernels.hpp"
#include "ergolab/space.hpp"

using namespace ergolab;
namespace s = ergolab::simd;

namespace {

std::vector<s::Backend> vector_backends() {
    std::vector<s::Backend> out;
    for (auto b : {s::Backend::Avx2, s::Backend::Neon})
        if (s::available(b)) out.push_back(b);
    return out;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1e3, double hi = 1e3) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("scalar backend is always available and selectable") {
    CHECK(s::available(s::Backend::Scalar));
    s::force_backend(s::Backend::Scalar);
    CHECK(s::active_backend() == s::Backend::Scalar);
    CHECK(s::kernels().backend == s::Backend::Scalar);
    s::reset_backend();
}

TEST_CASE("unavailable backends are rejected") {
    for (auto b : {s::Backend::Avx2, s::Backend::Neon})
        if (!s::available(b)) CHECK_THROWS(s::force_backend(b));
}

TEST_CASE("vector kernels are bit-identical to the scalar reference") {
    const auto& ref = s::kernels(s::Backend::Scalar);
    Rng rng(12345);
    std::vector<std::size_t> lengths;
    for (std::size_t n = 0; n <= 67; ++n) lengths.push_back(n);
    lengths.push_back(1000);
    lengths.push_back(100003);
    for (auto be : vector_backends()) {
        const auto& vk = s::kernels(be);
        for (std::size_t n : lengths)
            for (std::size_t offset : {0, 1, 3}) {  // unaligned starts
                CAPTURE(n);
                CAPTURE(offset);
                auto a = random_vec(rng, n + offset), b = random_vec(rng, n + offset);
                auto w = random_vec(rng, n + offset, 0.0, 1.0);
                const double* pa = a.data() + offset;
                const double* pb = b.data() + offset;
                const double* pw = w.data() + offset;

                CHECK(same_bits(ref.sum(pa, n), vk.sum(pa, n)));
                CHECK(same_bits(ref.dot(pa, pb, n), vk.dot(pa, pb, n)));
                CHECK(same_bits(ref.weighted_abs_sum(pa, pw, n), vk.weighted_abs_sum(pa, pw, n)));
                CHECK(same_bits(ref.weighted_sq_sum(pa, pw, n), vk.weighted_sq_sum(pa, pw, n)));
                CHECK(same_bits(ref.max_abs(pa, n), vk.max_abs(pa, n)));

                std::vector<double> o1(a), o2(a);
                ref.axpy(o1.data() + offset, 0.37, pb, n);
                vk.axpy(o2.data() + offset, 0.37, pb, n);
                CHECK(same_bits(o1, o2));

                o1 = a;
                o2 = a;
                ref.scale(o1.data() + offset, -1.25, n);
                vk.scale(o2.data() + offset, -1.25, n);
                CHECK(same_bits(o1, o2));

                std::vector<double> d1(n + offset, 0.0), d2(n + offset, 0.0);
                ref.subtract(d1.data() + offset, pa, pb, n);
                vk.subtract(d2.data() + offset, pa, pb, n);
                CHECK(same_bits(d1, d2));
            }
    }
}

TEST_CASE("reductions follow the four-lane canonical order") {
    // Lane sums of {1e16, 1, -1e16, 1, ...} differ from a left-to-right sum.
    std::vector<double> x = {1e16, 1.0, 1.0, 1.0, -1e16, 1.0, 1.0, 1.0, 3.0};
    double lane[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < x.size(); ++i) lane[i % 4] += x[i];
    const double expect = (lane[0] + lane[1]) + (lane[2] + lane[3]);
    CHECK(same_bits(s::kernels(s::Backend::Scalar).sum(x.data(), x.size()), expect));
    for (auto be : vector_backends()) CHECK(same_bits(s::kernels(be).sum(x.data(), x.size()), expect));
}

TEST_CASE("max_abs handles NaN-free edge values") {
    std::vector<double> x = {-0.0, 0.0, -7.5, 7.25, 1e-300};
    for (auto be : vector_backends()) CHECK(s::kernels(be).max_abs(x.data(), x.size()) == 7.5);
    CHECK(s::kernels(s::Backend::Scalar).max_abs(x.data(), 0) == 0.0);
}

TEST_CASE("operator application and norms agree bitwise across backends") {
    const auto sys = FiniteSystem::torus({37, 41});
    Rng rng(7);
    const auto f = random_zero_mean(sys, rng);
    const auto P = random_subset_operator(6, 2, 99);
    const auto Q = cube_operator(9, 2);

    s::force_backend(s::Backend::Scalar);
    const auto p_ref = apply_operator(P, sys, f), q_ref = apply_operator(Q, sys, f);
    const double n1 = lp_norm(p_ref, sys, 1.0), n2 = lp_norm(q_ref, sys, 2.0);
    for (auto be : vector_backends()) {
        s::force_backend(be);
        CHECK(same_bits(apply_operator(P, sys, f).values(), p_ref.values()));
        CHECK(same_bits(apply_operator(Q, sys, f).values(), q_ref.values()));
        CHECK(same_bits(lp_norm(p_ref, sys, 1.0), n1));
        CHECK(same_bits(lp_norm(q_ref, sys, 2.0), n2));
    }
    s::reset_backend();
}
