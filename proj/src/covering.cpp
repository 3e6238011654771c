#include "ergolab/covering.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

namespace ergolab {
namespace {

double ipow(double b, int d) {
    double r = 1.0;
    for (int i = 0; i < d; ++i) r *= b;
    return r;
}

std::size_t upow(std::size_t b, int d) {
    std::size_t r = 1;
    for (int i = 0; i < d; ++i) r *= b;
    return r;
}

// Window along one orbit: values v[i] = f(T^i w0), i < H. Block [p, p + ell)
// is heavy iff G[p + ell] > G[p] with G[k] = sum_{i<k} v[i] - s k. A sparse
// table of range maxima finds the first such ell in O(log H).
class OrbitWindow {
public:
    OrbitWindow(std::vector<double> v, double s) : v_(std::move(v)), s_(s) {
        const std::size_t n = v_.size() + 1;
        std::vector<double> G(n);
        double S = 0.0;
        G[0] = 0.0;
        for (std::size_t i = 0; i < v_.size(); ++i) {
            S += v_[i];
            G[i + 1] = S - s * static_cast<double>(i + 1);
        }
        levels_ = std::bit_width(n);
        table_.assign(levels_, {});
        table_[0] = std::move(G);
        for (std::size_t k = 1; k < levels_; ++k) {
            const std::size_t span = std::size_t{1} << k, half = span >> 1;
            if (span > n) break;
            table_[k].resize(n - span + 1);
            for (std::size_t i = 0; i + span <= n; ++i)
                table_[k][i] = std::max(table_[k - 1][i], table_[k - 1][i + half]);
        }
    }

    std::size_t size() const { return v_.size(); }

    // Direct sequential sum of the block [p, p + ell).
    bool verify(std::size_t p, std::size_t ell) const {
        double S = 0.0;
        for (std::size_t i = p; i < p + ell; ++i) S += v_[i];
        return S > s_ * static_cast<double>(ell);
    }

    // Minimal ell in [lo, hi] with block [p, p + ell) heavy, confirmed by direct
    // summation; 0 if none.
    std::size_t first_heavy(std::size_t p, std::size_t lo, std::size_t hi) const {
        if (hi > size() - p) hi = size() - p;
        if (lo < 1) lo = 1;
        while (lo <= hi) {
            const double g0 = table_[0][p];
            std::size_t a = p + lo;
            const std::size_t b = p + hi;
            if (range_max(a, b) <= g0) return 0;
            for (std::size_t k = levels_; k-- > 0;) {
                const std::size_t span = std::size_t{1} << k;
                if (table_[k].empty() || a + span - 1 > b) continue;
                if (table_[k][a] <= g0) a += span;
            }
            const std::size_t ell = a - p;
            if (verify(p, ell)) return ell;
            lo = ell + 1;  // rounding disagreement: keep searching
        }
        return 0;
    }

private:
    double range_max(std::size_t a, std::size_t b) const {
        const std::size_t len = b - a + 1;
        const std::size_t k = std::bit_width(len) - 1;
        return std::max(table_[k][a], table_[k][b + 1 - (std::size_t{1} << k)]);
    }

    std::vector<double> v_;
    double s_;
    std::size_t levels_ = 0;
    std::vector<std::vector<double>> table_;
};

std::vector<double> orbit_values(const FiniteSystem& sys, const Observable& f, Atom w0, std::size_t H) {
    std::vector<double> v;
    v.reserve(H);
    for_each_column_atom(sys, w0, H, [&](Atom x) { v.push_back(f[x]); });
    return v;
}

std::vector<Atom> orbit_atoms(const FiniteSystem& sys, Atom w0, std::size_t H) {
    std::vector<Atom> a;
    a.reserve(H);
    for_each_column_atom(sys, w0, H, [&](Atom x) { a.push_back(x); });
    return a;
}

// Greedy left-to-right selection on one orbit window.
std::vector<std::pair<std::size_t, std::size_t>> greedy_1d(const OrbitWindow& w, std::size_t Lmin, std::size_t Lmax) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const std::size_t H = w.size();
    std::size_t p = 0;
    while (p < H && H - p >= Lmin) {
        const std::size_t ell = w.first_heavy(p, Lmin, Lmax);
        if (ell > 0) {
            out.emplace_back(p, ell);
            p += ell;
        } else {
            ++p;
        }
    }
    return out;
}

// d >= 2 window: values on {0..H-1}^d relative to base b, plus a summed-area
// table of size (H+1)^d.
struct CubeWindow {
    int d;
    std::size_t H;
    std::vector<Atom> atoms;
    std::vector<double> vals;
    std::vector<double> sat;

    CubeWindow(const FiniteSystem& sys, const Observable& f, Atom b, std::size_t H_) : d(sys.dimension()), H(H_) {
        atoms.reserve(upow(H, d));
        for_each_column_atom(sys, b, H, [&](Atom x) { atoms.push_back(x); });
        vals.resize(atoms.size());
        for (std::size_t i = 0; i < atoms.size(); ++i) vals[i] = f[atoms[i]];
        const std::size_t E = H + 1;
        sat.assign(upow(E, d), 0.0);
        // sat[c + 1] = sum over the box [0, c]; built axis by axis.
        std::vector<std::size_t> c(d, 0);
        for (std::size_t i = 0; i < vals.size(); ++i) {
            std::size_t idx = 0;
            for (int k = 0; k < d; ++k) idx = idx * E + (c[k] + 1);
            sat[idx] = vals[i];
            for (int k = d - 1; k >= 0; --k) {
                if (++c[k] < H) break;
                c[k] = 0;
            }
        }
        std::size_t stride = 1;
        for (int axis = d - 1; axis >= 0; --axis) {
            for (std::size_t i = 0; i < sat.size(); ++i)
                if ((i / stride) % E != 0) sat[i] += sat[i - stride];
            stride *= E;
        }
    }

    double box_sum(const std::vector<std::int64_t>& lo, std::size_t side) const {
        const std::size_t E = H + 1;
        double s = 0.0;
        for (unsigned mask = 0; mask < (1u << d); ++mask) {
            std::size_t idx = 0;
            int flips = 0;
            for (int k = 0; k < d; ++k) {
                const bool hi = !(mask & (1u << k));
                idx = idx * E + static_cast<std::size_t>(lo[k]) + (hi ? side : 0);
                flips += hi ? 0 : 1;
            }
            s += (flips % 2 ? -1.0 : 1.0) * sat[idx];
        }
        return s;
    }

    double direct_sum(const std::vector<std::int64_t>& lo, std::size_t side) const {
        double s = 0.0;
        std::vector<std::size_t> w(d, 0);
        while (true) {
            std::size_t idx = 0;
            for (int k = 0; k < d; ++k) idx = idx * H + static_cast<std::size_t>(lo[k]) + w[k];
            s += vals[idx];
            int k = d - 1;
            while (k >= 0 && ++w[k] == side) w[k--] = 0;
            if (k < 0) break;
        }
        return s;
    }

    std::size_t index(const std::vector<std::int64_t>& c) const {
        std::size_t idx = 0;
        for (int k = 0; k < d; ++k) idx = idx * H + static_cast<std::size_t>(c[k]);
        return idx;
    }
};

}  // namespace

std::optional<std::size_t> first_passage(const FiniteSystem& sys, const Observable& f, Atom x,
                                         const HeavyOrbitParams& params) {
    if (!(params.s > 0.0)) throw Error("first_passage: s must be positive");
    if (params.L_cap < 1) throw Error("first_passage: L_cap must be at least 1");
    sys.check_atom(x);
    const int d = sys.dimension();
    double S = 0.0;
    if (d == 1) {
        Atom y = x;
        for (std::size_t L = 1; L <= params.L_cap; ++L) {
            y = sys.step(0, y);
            S += f[y];
            if (L >= params.L_min && S > params.s * static_cast<double>(L)) return L;
        }
        return std::nullopt;
    }
    // Grow the cube {1..L}^d by its outer shell {z : max_i z_i = L}.
    for (std::size_t L = 1; L <= params.L_cap; ++L) {
        GroupElement z(d, 1);
        while (true) {
            if (std::any_of(z.begin(), z.end(), [L](std::int64_t v) { return v == static_cast<std::int64_t>(L); }))
                S += f[sys.apply(z, x)];
            int k = d - 1;
            while (k >= 0 && ++z[k] > static_cast<std::int64_t>(L)) z[k--] = 1;
            if (k < 0) break;
        }
        if (L >= params.L_min && S > params.s * ipow(static_cast<double>(L), d)) return L;
    }
    return std::nullopt;
}

WindowSelection greedy_cube_selection(int d, std::size_t H, std::vector<Cube> candidates, SelectionStrategy strategy) {
    if (H < 1) throw Error("greedy_cube_selection: window side must be at least 1");
    WindowSelection res;
    std::vector<Cube> fit;
    for (auto& c : candidates) {
        if (static_cast<int>(c.corner.size()) != d) throw Error("greedy_cube_selection: candidate dimension mismatch");
        bool inside = c.side >= 1;
        for (auto v : c.corner) inside = inside && v >= 0 && static_cast<std::size_t>(v) + c.side <= H;
        if (inside)
            fit.push_back(std::move(c));
        else
            ++res.discarded;
    }
    if (strategy == SelectionStrategy::Lexicographic)
        std::stable_sort(fit.begin(), fit.end(), [](const Cube& a, const Cube& b) { return a.corner < b.corner; });
    else
        std::stable_sort(fit.begin(), fit.end(), [](const Cube& a, const Cube& b) {
            return a.side != b.side ? a.side > b.side : a.corner < b.corner;
        });
    std::vector<std::uint8_t> occ(upow(H, d), 0);
    auto for_cells = [&](const Cube& c, auto fn) {
        std::vector<std::size_t> w(d, 0);
        while (true) {
            std::size_t idx = 0;
            for (int k = 0; k < d; ++k) idx = idx * H + static_cast<std::size_t>(c.corner[k]) + w[k];
            if (!fn(idx)) return false;
            int k = d - 1;
            while (k >= 0 && ++w[k] == c.side) w[k--] = 0;
            if (k < 0) return true;
        }
    };
    for (const auto& c : fit) {
        if (!for_cells(c, [&](std::size_t idx) { return occ[idx] == 0; })) continue;
        for_cells(c, [&](std::size_t idx) {
            occ[idx] = 1;
            return true;
        });
        res.covered_cells += upow(c.side, d);
        res.selected.push_back(c);
    }
    res.fraction = static_cast<double>(res.covered_cells) / static_cast<double>(occ.size());
    return res;
}

CoveringResult greedy_heavy_partition_1d(const FiniteSystem& sys, const Observable& f, const HeavyOrbitParams& params,
                                         Atom w0, std::size_t H) {
    if (sys.dimension() != 1) throw Error("greedy_heavy_partition_1d needs d = 1");
    if (H < 1) throw Error("greedy_heavy_partition_1d: window shorter than 1");
    if (!(params.s > 0.0)) throw Error("greedy_heavy_partition_1d: s must be positive");
    sys.check_atom(w0);
    const auto atoms = orbit_atoms(sys, w0, H);
    OrbitWindow w(orbit_values(sys, f, w0, H), params.s);
    CoveringResult res;
    res.H = H;
    std::vector<Atom> Y;
    for (auto [p, ell] : greedy_1d(w, params.L_min, params.L_cap)) {
        res.selected.push_back({atoms[p], ell});
        Y.insert(Y.end(), atoms.begin() + p, atoms.begin() + p + ell);
    }
    std::vector<Atom> win(atoms);
    res.Y = AtomSet(sys, std::move(Y));
    const double mu_window = AtomSet(sys, std::move(win)).measure();
    res.fraction = mu_window > 0.0 ? res.Y.measure() / mu_window : 0.0;
    return res;
}

YNReport build_Y_N(const FiniteSystem& sys, const Observable& f, double s, std::size_t L, std::size_t N,
                   const Tower& tower, SelectionStrategy strategy) {
    if (!(s > 0.0)) throw Error("build_Y_N: s must be positive");
    if (L < 1 || N < L) throw Error("build_Y_N: need 1 <= L <= N");
    if (tower.d != sys.dimension()) throw Error("build_Y_N: tower shape incompatible with the system");
    if (tower.side < N) throw Error("build_Y_N: tower side must be at least N");
    if (f.size() != sys.size()) throw Error("build_Y_N: observable length differs from atom count");
    const int d = sys.dimension();
    const std::size_t H = tower.side;
    YNReport rep;
    rep.N = N;
    rep.L = L;
    std::vector<Atom> Y;
    std::size_t candidates = 0, window_atoms = 0;
    for (Atom b : tower.base.members()) {
        if (d == 1) {
            const auto atoms = orbit_atoms(sys, b, H);
            OrbitWindow w(orbit_values(sys, f, b, H), s);
            for (std::size_t p = 0; p + L <= H; ++p) candidates += w.first_heavy(p, L, N) > 0;
            window_atoms += H;
            for (auto [p, ell] : greedy_1d(w, L, N)) {
                rep.blocks.push_back({atoms[p], ell});
                Y.insert(Y.end(), atoms.begin() + p, atoms.begin() + p + ell);
            }
            continue;
        }
        CubeWindow w(sys, f, b, H);
        window_atoms += w.atoms.size();
        std::vector<Cube> cand;
        std::vector<std::int64_t> c(d, 0);
        for (std::size_t i = 0; i < w.atoms.size(); ++i) {
            std::int64_t mx = *std::max_element(c.begin(), c.end());
            const std::size_t room = H - static_cast<std::size_t>(mx);
            for (std::size_t ell = L; ell <= std::min(N, room); ++ell)
                if (w.box_sum(c, ell) > s * ipow(static_cast<double>(ell), d)) {
                    cand.push_back({c, ell});
                    ++candidates;
                    break;
                }
            for (int k = d - 1; k >= 0; --k) {
                if (++c[k] < static_cast<std::int64_t>(H)) break;
                c[k] = 0;
            }
        }
        WindowSelection sel = greedy_cube_selection(d, H, std::move(cand), strategy);
        for (const auto& cube : sel.selected) {
            if (!(w.direct_sum(cube.corner, cube.side) > s * ipow(static_cast<double>(cube.side), d))) continue;
            rep.blocks.push_back({w.atoms[w.index(cube.corner)], cube.side});
            std::vector<std::size_t> o(d, 0);
            while (true) {
                std::size_t idx = 0;
                for (int k = 0; k < d; ++k) idx = idx * H + static_cast<std::size_t>(cube.corner[k]) + o[k];
                Y.push_back(w.atoms[idx]);
                int k = d - 1;
                while (k >= 0 && ++o[k] == cube.side) o[k--] = 0;
                if (k < 0) break;
            }
        }
    }
    rep.Y = AtomSet(sys, std::move(Y));
    rep.mu_Y = rep.Y.measure();
    rep.integral = integrate(sys, f, rep.Y);
    rep.normalized_integral = rep.Y.empty() ? 0.0 : rep.integral / rep.mu_Y;
    rep.uncovered = tower.measure() - rep.mu_Y;
    rep.candidate_fraction = window_atoms ? static_cast<double>(candidates) / static_cast<double>(window_atoms) : 0.0;
    return rep;
}

std::size_t suggest_min_length(const FiniteSystem& sys, const Observable& f, double s, std::size_t N,
                               const Tower& tower, double coverage) {
    std::size_t best = 1;
    for (std::size_t L = 1; L <= N; L *= 2) {
        if (build_Y_N(sys, f, s, L, N, tower).candidate_fraction >= coverage) best = L;
        else break;
    }
    return best;
}

std::vector<double> almost_invariance_profile(const FiniteSystem& sys, const AtomSet& Y,
                                              const std::vector<GroupElement>& shifts) {
    std::vector<double> out;
    out.reserve(shifts.size());
    for (const auto& z : shifts) out.push_back(symmetric_difference(Y, translate_set(sys, z, Y), sys).measure());
    return out;
}

std::vector<BirkhoffRow> birkhoff_contradiction_experiment(const FiniteSystem& sys, const Observable& f, double s,
                                                           const std::vector<std::size_t>& schedule,
                                                           const Tower& tower, double min_length_ratio) {
    if (std::fabs(integrate(sys, f)) > 1e-10) throw Error("birkhoff experiment needs a zero-mean observable");
    if (!sys.ergodic()) throw Error("birkhoff experiment needs an ergodic system");
    const int d = sys.dimension();
    std::vector<GroupElement> gens;
    for (int i = 0; i < d; ++i) {
        GroupElement e(d, 0);
        e[i] = 1;
        gens.push_back(e);
    }
    std::vector<BirkhoffRow> rows;
    for (std::size_t N : schedule) {
        const std::size_t L =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(min_length_ratio * static_cast<double>(N) - 1e-9)));
        YNReport rep = build_Y_N(sys, f, s, L, N, tower);
        BirkhoffRow row;
        row.N = N;
        row.L = L;
        row.mu_Y = rep.mu_Y;
        row.integral = rep.integral;
        row.normalized_integral = rep.normalized_integral;
        row.sym_diff = almost_invariance_profile(sys, rep.Y, gens);
        row.blocks = rep.blocks.size();
        row.fraction = tower.measure() > 0.0 ? rep.mu_Y / tower.measure() : 0.0;
        row.heavy_property = rep.Y.empty() || rep.integral > s * rep.mu_Y;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace ergolab
