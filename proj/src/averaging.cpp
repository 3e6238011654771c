#include "ergolab/averaging.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ergolab/simd/kernels.hpp"

namespace ergolab {
namespace {

std::int64_t mod(std::int64_t a, std::int64_t m) {
    std::int64_t r = a % m;
    return r < 0 ? r + m : r;
}

void check_dims(const WeightedOperator& P, const FiniteSystem& sys, const Observable& f) {
    if (P.dimension() != sys.dimension())
        throw Error("operator dimension " + std::to_string(P.dimension()) + " differs from system dimension " +
                    std::to_string(sys.dimension()));
    if (f.size() != sys.size()) throw Error("observable length differs from atom count");
}

// Calls fn(dst, src, len) for contiguous runs such that
// out[dst + t] pairs with f[src + t] = f(T^z (dst + t)), t < len.
template <class Fn>
void for_each_shifted_run(const FiniteSystem& sys, const GroupElement& z, Fn fn) {
    const auto& dims = sys.dims();
    const int d = sys.dimension();
    std::vector<std::size_t> k(d), stride(d, 1);
    for (int i = 0; i < d; ++i) k[i] = static_cast<std::size_t>(mod(z[i], static_cast<std::int64_t>(dims[i])));
    for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];
    const std::size_t row = dims[d - 1], rows = sys.size() / row, kr = k[d - 1];
    std::vector<std::size_t> c(d, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t src = 0;
        for (int i = 0; i + 1 < d; ++i) {
            std::size_t ci = c[i] + k[i];
            if (ci >= dims[i]) ci -= dims[i];
            src += ci * stride[i];
        }
        const std::size_t dst = r * row;
        if (row - kr > 0) fn(dst, src + kr, row - kr);
        if (kr > 0) fn(dst + (row - kr), src, kr);
        for (int i = d - 2; i >= 0; --i) {
            if (++c[i] < dims[i]) break;
            c[i] = 0;
        }
    }
}

// out[c] = (1/N) sum_{k=1..N} in[(c + k) mod m] via long-double prefix sums.
void cyclic_box(const double* in, std::size_t m, std::size_t N, double* out, std::vector<long double>& P) {
    P.resize(m + 1);
    P[0] = 0.0L;
    for (std::size_t i = 0; i < m; ++i) P[i + 1] = P[i] + static_cast<long double>(in[i]);
    const std::size_t q = N / m, r = N % m;
    const long double base = static_cast<long double>(q) * P[m];
    const long double invN = 1.0L / static_cast<long double>(N);
    for (std::size_t c = 0; c < m; ++c) {
        std::size_t s = c + 1;
        if (s == m) s = 0;
        long double part;
        if (s + r <= m)
            part = P[s + r] - P[s];
        else
            part = (P[m] - P[s]) + P[s + r - m];
        out[c] = static_cast<double>((base + part) * invN);
    }
}

Observable apply_cube(std::size_t N, const FiniteSystem& sys, const Observable& f) {
    const std::size_t M = sys.size();
    std::vector<double> cur(f.values()), in_line, out_line;
    std::vector<long double> P;
    if (!sys.is_torus()) {
        const auto& mem = sys.cycle_members();
        const auto& off = sys.cycle_offsets();
        std::vector<double> out(M);
        for (std::size_t c = 0; c + 1 < off.size(); ++c) {
            const std::size_t len = off[c + 1] - off[c];
            in_line.resize(len);
            out_line.resize(len);
            for (std::size_t p = 0; p < len; ++p) in_line[p] = cur[mem[off[c] + p]];
            cyclic_box(in_line.data(), len, N, out_line.data(), P);
            for (std::size_t p = 0; p < len; ++p) out[mem[off[c] + p]] = out_line[p];
        }
        return Observable(std::move(out));
    }
    const auto& dims = sys.dims();
    const int d = sys.dimension();
    std::vector<double> next(M);
    std::size_t stride = M;
    for (int a = 0; a < d; ++a) {
        const std::size_t m = dims[a];
        stride /= m;
        in_line.resize(m);
        out_line.resize(m);
        // Lines along axis a: fix the outer block and the inner offset.
        for (std::size_t outer = 0; outer < M; outer += m * stride)
            for (std::size_t inner = 0; inner < stride; ++inner) {
                const std::size_t base = outer + inner;
                for (std::size_t c = 0; c < m; ++c) in_line[c] = cur[base + c * stride];
                cyclic_box(in_line.data(), m, N, out_line.data(), P);
                for (std::size_t c = 0; c < m; ++c) next[base + c * stride] = out_line[c];
            }
        cur.swap(next);
    }
    return Observable(std::move(cur));
}

double sum_compensated(const std::vector<double>& w) {
    double s = 0.0, c = 0.0;
    for (double x : w) {
        double t = s + x;
        c += std::fabs(s) >= std::fabs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }
    return s + c;
}

std::int64_t norm2(const GroupElement& z) {
    std::int64_t s = 0;
    for (auto v : z) s += v * v;
    return s;
}

// All z in [-R, R]^d in lexicographic order.
template <class Fn>
void for_each_in_box(int d, std::int64_t R, Fn fn) {
    GroupElement z(d, -R);
    while (true) {
        fn(z);
        int i = d - 1;
        while (i >= 0 && z[i] == R) z[i--] = -R;
        if (i < 0) break;
        ++z[i];
    }
}

}  // namespace

WeightedOperator::WeightedOperator(int d, std::vector<std::pair<GroupElement, double>> terms) : d_(d) {
    if (d < 1) throw Error("operator dimension must be positive");
    for (const auto& [z, w] : terms) {
        if (static_cast<int>(z.size()) != d) throw Error("support element has wrong dimension");
        if (!std::isfinite(w) || w < 0.0) throw Error("operator weights must be finite and nonnegative");
    }
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [z, w] : terms) {
        if (w == 0.0) continue;
        if (!z_.empty() && z_.back() == z)
            w_.back() += w;
        else {
            z_.push_back(std::move(z));
            w_.push_back(w);
        }
    }
    if (z_.empty()) throw Error("operator has empty support");
    if (std::fabs(sum_compensated(w_) - 1.0) > kTol) throw Error("operator weights must sum to 1");
}

WeightedOperator cube_operator(std::size_t N, int d) {
    if (N < 1) throw Error("cube side must be at least 1");
    if (d < 1) throw Error("cube dimension must be positive");
    std::size_t count = 1;
    for (int i = 0; i < d; ++i) {
        if (count > kDefaultSupportCap * 100 / N) throw Error("cube support too large to enumerate");
        count *= N;
    }
    WeightedOperator P;
    P.d_ = d;
    P.cube_ = N;
    const double w = 1.0 / static_cast<double>(count);
    P.z_.reserve(count);
    GroupElement z(d, 1);
    for (std::size_t k = 0; k < count; ++k) {
        P.z_.push_back(z);
        for (int i = d - 1; i >= 0; --i) {
            if (++z[i] <= static_cast<std::int64_t>(N)) break;
            z[i] = 1;
        }
    }
    P.w_.assign(count, w);
    return P;
}

WeightedOperator shell_operator(int j, double c, int d) {
    if (j < 0 || !(c > 0.0)) throw Error("shell needs j >= 0 and c > 0");
    const double hi = static_cast<double>(j) + c;
    const std::int64_t R = static_cast<std::int64_t>(std::ceil(hi));
    const std::int64_t lo2 = static_cast<std::int64_t>(j) * j;
    const double hi2 = hi * hi;
    std::vector<GroupElement> pts;
    for_each_in_box(d, R, [&](const GroupElement& z) {
        const std::int64_t n = norm2(z);
        if (n > lo2 && static_cast<double>(n) < hi2) pts.push_back(z);
    });
    if (pts.empty())
        throw Error("empty shell for j = " + std::to_string(j) + ", c = " + std::to_string(c));
    std::vector<std::pair<GroupElement, double>> terms;
    const double w = 1.0 / static_cast<double>(pts.size());
    for (auto& z : pts) terms.emplace_back(std::move(z), w);
    return WeightedOperator(d, std::move(terms));
}

WeightedOperator random_subset_operator(int j, int d, std::uint64_t seed) {
    if (j < 1) throw Error("random subset needs j >= 1");
    const std::int64_t j2 = static_cast<std::int64_t>(j) * j;
    std::vector<GroupElement> ball;
    for_each_in_box(d, j, [&](const GroupElement& z) {
        if (norm2(z) <= j2) ball.push_back(z);
    });
    if (ball.size() < static_cast<std::size_t>(j))
        throw Error("ball B_j has fewer than j lattice points");
    Rng rng(seed);
    for (std::size_t i = 0; i < static_cast<std::size_t>(j); ++i) {
        const std::size_t k = i + rng.below(ball.size() - i);
        std::swap(ball[i], ball[k]);
    }
    std::vector<std::pair<GroupElement, double>> terms;
    const double w = 1.0 / static_cast<double>(j);
    for (int i = 0; i < j; ++i) terms.emplace_back(ball[i], w);
    return WeightedOperator(d, std::move(terms));
}

WeightedOperator point_mass(const GroupElement& z) {
    return WeightedOperator(static_cast<int>(z.size()), {{z, 1.0}});
}

Observable apply_operator_direct(const WeightedOperator& P, const FiniteSystem& sys, const Observable& f) {
    check_dims(P, sys, f);
    const auto& K = simd::kernels();
    std::vector<double> out(sys.size(), 0.0);
    if (sys.is_torus()) {
        for (std::size_t t = 0; t < P.size(); ++t) {
            const double w = P.weights()[t];
            for_each_shifted_run(sys, P.support()[t], [&](std::size_t dst, std::size_t src, std::size_t len) {
                K.axpy(out.data() + dst, w, f.data() + src, len);
            });
        }
    } else {
        std::vector<double> tmp(sys.size());
        for (std::size_t t = 0; t < P.size(); ++t) {
            sys.pullback(P.support()[t], f.span(), tmp);
            K.axpy(out.data(), P.weights()[t], tmp.data(), tmp.size());
        }
    }
    return Observable(std::move(out));
}

Observable apply_operator(const WeightedOperator& P, const FiniteSystem& sys, const Observable& f) {
    check_dims(P, sys, f);
    if (P.cube_side() > 0) return apply_cube(P.cube_side(), sys, f);
    return apply_operator_direct(P, sys, f);
}

WeightedOperator adjoint(const WeightedOperator& P) {
    std::vector<std::pair<GroupElement, double>> terms;
    terms.reserve(P.size());
    for (std::size_t t = 0; t < P.size(); ++t) {
        GroupElement z = P.support()[t];
        for (auto& v : z) v = -v;
        terms.emplace_back(std::move(z), P.weights()[t]);
    }
    return WeightedOperator(P.dimension(), std::move(terms));
}

WeightedOperator compose(const WeightedOperator& P, const WeightedOperator& Q, std::size_t cap) {
    if (P.dimension() != Q.dimension()) throw Error("compose: dimension mismatch");
    const int d = P.dimension();
    if (P.size() > 0 && Q.size() > (cap * 64) / P.size())
        throw Error("compose: support product " + std::to_string(P.size()) + " x " + std::to_string(Q.size()) +
                    " exceeds the cap");
    std::vector<std::pair<GroupElement, double>> terms;
    terms.reserve(P.size() * Q.size());
    for (std::size_t a = 0; a < P.size(); ++a)
        for (std::size_t b = 0; b < Q.size(); ++b) {
            GroupElement z(d);
            for (int i = 0; i < d; ++i) z[i] = P.support()[a][i] + Q.support()[b][i];
            terms.emplace_back(std::move(z), P.weights()[a] * Q.weights()[b]);
        }
    WeightedOperator R(d, std::move(terms));
    if (R.size() > cap)
        throw Error("compose: merged support " + std::to_string(R.size()) + " exceeds the cap " + std::to_string(cap));
    return R;
}

double lp_norm(const Observable& f, const FiniteSystem& sys, double p) {
    if (f.size() != sys.size()) throw Error("observable length differs from atom count");
    const auto& K = simd::kernels();
    if (p == 1.0) return K.weighted_abs_sum(f.data(), sys.weights().data(), f.size());
    if (p == 2.0) return std::sqrt(K.weighted_sq_sum(f.data(), sys.weights().data(), f.size()));
    if (std::isinf(p)) {
        if (sys.uniform()) return K.max_abs(f.data(), f.size());
        double m = 0.0;
        for (std::size_t x = 0; x < f.size(); ++x)
            if (sys.weight(static_cast<Atom>(x)) > 0.0) m = std::fmax(m, std::fabs(f[x]));
        return m;
    }
    throw Error("lp_norm supports p in {1, 2, inf}");
}

double inner(const Observable& f, const Observable& h, const FiniteSystem& sys) {
    if (f.size() != sys.size() || h.size() != sys.size()) throw Error("observable length differs from atom count");
    std::vector<double> fw(f.size());
    for (std::size_t x = 0; x < f.size(); ++x) fw[x] = f[x] * sys.weights()[x];
    return simd::kernels().dot(fw.data(), h.data(), fw.size());
}

Observable mean_projection(const FiniteSystem& sys, const Observable& f) {
    return Observable::constant(sys, integrate(sys, f));
}

double commutator_defect(const WeightedOperator& P, const GroupElement& g, const FiniteSystem& sys,
                         const Observable& f) {
    sys.check_dimension(g);
    Observable Pf = apply_operator(P, sys, f);
    std::vector<double> shifted(sys.size());
    sys.pullback(g, Pf.span(), shifted);
    simd::kernels().subtract(shifted.data(), shifted.data(), Pf.data(), shifted.size());
    return lp_norm(Observable(std::move(shifted)), sys, 2.0);
}

double power_correlation(const WeightedOperator& P, const GroupElement& g, unsigned k, const FiniteSystem& sys,
                         const Observable& f, const Observable& h, std::size_t cap) {
    sys.check_dimension(g);
    WeightedOperator Q = compose(adjoint(P), P, cap);
    for (unsigned i = 0; i < k; ++i) Q = compose(Q, Q, cap);
    Observable Qf = apply_operator(Q, sys, f);
    std::vector<double> shifted(sys.size());
    sys.pullback(g, Qf.span(), shifted);
    return inner(Observable(std::move(shifted)), h, sys) - integrate(sys, f) * integrate(sys, h);
}

std::vector<SweepRow> convergence_sweep(const FiniteSystem& sys, const Observable& f, const OperatorFamily& family,
                                        const std::vector<std::size_t>& Ns) {
    const double mean = integrate(sys, f);
    std::vector<SweepRow> rows;
    rows.reserve(Ns.size());
    for (std::size_t N : Ns) {
        Observable dev = apply_operator(family(N), sys, f);
        for (double& v : dev.values()) v -= mean;
        rows.push_back({N, lp_norm(dev, sys, 1.0), lp_norm(dev, sys, 2.0), lp_norm(dev, sys, kInf)});
    }
    return rows;
}

OperatorFamily cube_family(int d) {
    return [d](std::size_t N) { return cube_operator(N, d); };
}

}  // namespace ergolab
