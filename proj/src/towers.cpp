#include "ergolab/towers.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>

namespace ergolab {
namespace {

void require_d1_ergodic(const FiniteSystem& sys, const char* what) {
    if (sys.dimension() != 1) throw Error(std::string(what) + " needs a d = 1 system");
    if (!sys.ergodic()) throw Error(std::string(what) + " needs an ergodic (single-cycle) system");
}

// T^k b along the cycle containing b.
Atom advance(const FiniteSystem& sys, Atom b, std::size_t k) {
    const std::size_t c = sys.cycle_of(b);
    const std::size_t off = sys.cycle_offsets()[c], len = sys.cycle_offsets()[c + 1] - off;
    return sys.cycle_members()[off + (sys.position_in_cycle(b) + k) % len];
}

double mass_of(const FiniteSystem& sys, const std::vector<std::uint8_t>& mask) {
    if (sys.uniform()) {
        std::size_t n = 0;
        for (auto v : mask) n += v;
        return static_cast<double>(n) / static_cast<double>(sys.size());
    }
    double s = 0.0, c = 0.0;
    for (std::size_t x = 0; x < mask.size(); ++x)
        if (mask[x]) {
            const double v = sys.weights()[x];
            const double t = s + v;
            c += std::fabs(s) >= std::fabs(v) ? (s - t) + v : (v - t) + s;
            s = t;
        }
    return s + c;
}

std::size_t side_power(std::size_t side, int d) {
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= side;
    return n;
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

// corr[z] = sum_x a(x) b(x - z) over the row-major torus, via r2c/c2r DFTs.
std::vector<double> cross_correlation(const std::vector<std::size_t>& dims, const std::vector<double>& a,
                                      const std::vector<double>& b) {
    const int d = static_cast<int>(dims.size());
    std::vector<int> n(dims.begin(), dims.end());
    const std::size_t M = a.size();
    const std::size_t half = (M / dims[d - 1]) * (dims[d - 1] / 2 + 1);
    std::unique_ptr<double, FftwFree> buf(static_cast<double*>(fftw_malloc(sizeof(double) * M)));
    std::unique_ptr<fftw_complex, FftwFree> fa(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * half)));
    std::unique_ptr<fftw_complex, FftwFree> fb(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * half)));
    fftw_plan fwd_a = fftw_plan_dft_r2c(d, n.data(), buf.get(), fa.get(), FFTW_ESTIMATE);
    fftw_plan fwd_b = fftw_plan_dft_r2c(d, n.data(), buf.get(), fb.get(), FFTW_ESTIMATE);
    fftw_plan inv = fftw_plan_dft_c2r(d, n.data(), fa.get(), buf.get(), FFTW_ESTIMATE);
    std::copy(a.begin(), a.end(), buf.get());
    fftw_execute(fwd_a);
    std::copy(b.begin(), b.end(), buf.get());
    fftw_execute(fwd_b);
    for (std::size_t k = 0; k < half; ++k) {
        const double ar = fa.get()[k][0], ai = fa.get()[k][1];
        const double br = fb.get()[k][0], bi = -fb.get()[k][1];
        fa.get()[k][0] = ar * br - ai * bi;
        fa.get()[k][1] = ar * bi + ai * br;
    }
    fftw_execute(inv);
    std::vector<double> out(buf.get(), buf.get() + M);
    const double scale = 1.0 / static_cast<double>(M);
    for (double& v : out) v *= scale;
    fftw_destroy_plan(fwd_a);
    fftw_destroy_plan(fwd_b);
    fftw_destroy_plan(inv);
    return out;
}

}  // namespace

// ------------------------------------------------------------------ Kakutani

KakutaniPartition kakutani_partition(const FiniteSystem& sys, const AtomSet& D) {
    require_d1_ergodic(sys, "kakutani_partition");
    if (D.empty()) throw Error("kakutani_partition: empty base D");
    if (D.system_id() != sys.id()) throw Error("kakutani_partition: D belongs to a different system");
    const std::size_t M = sys.size();
    std::vector<std::size_t> pos;
    pos.reserve(D.size());
    for (Atom x : D.members()) pos.push_back(sys.position_in_cycle(x));
    std::sort(pos.begin(), pos.end());
    std::map<std::size_t, std::vector<Atom>> by_height;
    const auto& members = sys.cycle_members();
    for (std::size_t i = 0; i < pos.size(); ++i) {
        const std::size_t next = i + 1 < pos.size() ? pos[i + 1] : pos[0] + M;
        by_height[next - pos[i]].push_back(members[pos[i]]);
    }
    KakutaniPartition kp;
    kp.D = D;
    for (auto& [h, atoms] : by_height) kp.columns.push_back({h, AtomSet(sys, std::move(atoms))});
    return kp;
}

// ------------------------------------------------------------------ towers

bool floors_disjoint(const FiniteSystem& sys, std::size_t side, const AtomSet& base) {
    std::vector<std::uint8_t> mask(sys.size(), 0);
    bool ok = true;
    for (Atom b : base.members())
        for_each_column_atom(sys, b, side, [&](Atom x) {
            if (mask[x]) ok = false;
            mask[x] = 1;
        });
    return ok;
}

Tower make_tower(const FiniteSystem& sys, std::size_t side, AtomSet base) {
    if (side < 1) throw Error("tower side must be at least 1");
    if (base.system_id() != sys.id()) throw Error("tower base belongs to a different system");
    std::vector<std::uint8_t> mask(sys.size(), 0);
    for (Atom b : base.members())
        for_each_column_atom(sys, b, side, [&](Atom x) {
            if (mask[x]) throw Error("tower floors are not disjoint (atom " + std::to_string(x) + ")");
            mask[x] = 1;
        });
    for (auto& v : mask) v = !v;
    Tower t;
    t.d = sys.dimension();
    t.side = side;
    t.base = std::move(base);
    t.residual = AtomSet::from_mask(sys, mask);
    return t;
}

AtomSet tower_set(const FiniteSystem& sys, const Tower& t) { return complement(t.residual, sys); }

RokhlinReport rokhlin_tower_1d(const FiniteSystem& sys, std::size_t n, double eps, std::optional<AtomSet> D) {
    require_d1_ergodic(sys, "rokhlin_tower_1d");
    if (n < 1) throw Error("rokhlin_tower_1d: n must be at least 1");
    if (!(eps > 0.0)) throw Error("rokhlin_tower_1d: eps must be positive");
    if (n > sys.size())
        throw Error("rokhlin_tower_1d: infeasible, n = " + std::to_string(n) + " exceeds M = " +
                    std::to_string(sys.size()));
    AtomSet base_D = D ? *D : AtomSet(sys, {0});
    RokhlinReport r;
    r.first = kakutani_partition(sys, base_D);
    const double ratio = static_cast<double>(n) / eps;
    r.k_target = ratio >= 1e18 ? static_cast<std::size_t>(1e18) : static_cast<std::size_t>(std::floor(ratio)) + 1;
    // Columns of height >= k; at finite scale k is capped by the tallest column.
    const std::size_t k = std::min(r.k_target, r.first.max_height());
    std::vector<Atom> Dk;
    for (const auto& col : r.first.columns)
        if (col.height >= k) Dk.insert(Dk.end(), col.base.members().begin(), col.base.members().end());
    r.second = kakutani_partition(sys, AtomSet(sys, std::move(Dk)));
    r.k_used = r.second.min_height();
    r.bound = static_cast<double>(n) / static_cast<double>(r.k_used);
    std::vector<Atom> B;
    for (const auto& col : r.second.columns)
        for (Atom b : col.base.members())
            for (std::size_t i = 0; i + n <= col.height; i += n) B.push_back(advance(sys, b, i));
    r.tower = make_tower(sys, n, AtomSet(sys, std::move(B)));
    if (!(r.tower.residual.measure() < eps))
        throw Error("rokhlin_tower_1d: infeasible, residual " + std::to_string(r.tower.residual.measure()) +
                    " >= eps " + std::to_string(eps));
    return r;
}

Tower tower_exists(const FiniteSystem& sys, std::size_t N, Atom b) {
    if (N < 1) throw Error("tower side must be at least 1");
    if (sys.is_torus()) {
        for (std::size_t m : sys.dims())
            if (N > m) throw Error("tower side " + std::to_string(N) + " exceeds a period " + std::to_string(m));
    } else {
        const std::size_t c = sys.cycle_of(b);
        if (N > sys.cycle_offsets()[c + 1] - sys.cycle_offsets()[c]) throw Error("tower side exceeds the cycle length");
    }
    return make_tower(sys, N, AtomSet(sys, {b}));
}

// ------------------------------------------------------------------ overlap search

ShiftResult overlap_shift_search(const FiniteSystem& sys, const AtomSet& U, const AtomSet& V, double delta,
                                 std::uint64_t seed, std::size_t exhaustive_limit, std::size_t samples) {
    if (!(delta > 0.0)) throw Error("overlap_shift_search: delta must be positive");
    const int d = sys.dimension();
    const double bound = U.measure() * V.measure() + delta;
    ShiftResult res;
    res.bound = bound;
    if (V.empty() || U.empty()) {
        res.z = GroupElement(d, 0);
        res.overlap = 0.0;
        res.exhaustive = true;
        return res;
    }
    const std::size_t M = sys.size();
    if (M <= exhaustive_limit) {
        if (!sys.is_torus() && !sys.ergodic())
            throw Error("overlap_shift_search: exhaustive search needs a torus or a single cycle");
        // Relabel by cycle position so a shift is a cyclic index shift.
        std::vector<double> a(M, 0.0), b(M, 0.0);
        auto slot = [&](Atom x) -> std::size_t { return sys.is_torus() ? x : sys.position_in_cycle(x); };
        for (Atom x : U.members()) a[slot(x)] = sys.uniform() ? 1.0 : sys.weight(x);
        for (Atom x : V.members()) b[slot(x)] = 1.0;
        std::vector<double> corr = cross_correlation(sys.dims(), a, b);
        std::size_t best = 0;
        double best_v = INFINITY;
        for (std::size_t k = 0; k < M; ++k) {
            const double v = sys.uniform() ? std::nearbyint(corr[k]) : corr[k];
            if (v < best_v - (sys.uniform() ? 0.5 : 1e-13)) {
                best_v = v;
                best = k;
            }
        }
        res.exhaustive = true;
        res.overlap = sys.uniform() ? best_v / static_cast<double>(M) : best_v;
        if (sys.is_torus())
            res.z = sys.coords(static_cast<Atom>(best));
        else
            res.z = {static_cast<std::int64_t>(best)};
    } else {
        Rng rng(seed);
        const auto mask = U.mask(M);
        double best_v = INFINITY;
        GroupElement best_z;
        for (std::size_t s = 0; s < samples; ++s) {
            GroupElement z(d);
            for (int i = 0; i < d; ++i) z[i] = static_cast<std::int64_t>(rng.below(sys.dims()[i]));
            double v = 0.0;
            for (Atom y : V.members()) {
                const Atom x = sys.apply(z, y);
                if (mask[x]) v += sys.weight(x);
            }
            if (v < best_v) {
                best_v = v;
                best_z = z;
            }
        }
        res.exhaustive = false;
        res.overlap = best_v;
        res.z = best_z;
    }
    if (!(res.overlap < bound))
        throw Error("overlap_shift_search: no qualifying shift; minimum overlap " + std::to_string(res.overlap) +
                    " >= uv + delta = " + std::to_string(bound));
    return res;
}

// ------------------------------------------------------------------ merge

Tower tower_merge_step(const FiniteSystem& sys, const Tower& U, const Tower& V, const GroupElement& z,
                       MergeLedger* ledger) {
    const std::size_t N = U.side, H = V.side;
    const int d = sys.dimension();
    sys.check_dimension(z);
    if (H % N != 0) throw Error("tower_merge_step: H = " + std::to_string(H) + " is not a multiple of N = " +
                                std::to_string(N));
    const AtomSet Vz = translate_set(sys, z, V.base);
    std::vector<std::uint8_t> vmask(sys.size(), 0);
    for (Atom b : Vz.members())
        for_each_column_atom(sys, b, H, [&](Atom x) {
            if (vmask[x]) throw Error("tower_merge_step: shifted V is not a tower");
            vmask[x] = 1;
        });
    std::vector<Atom> kept, rebased;
    std::size_t removed_columns = 0;
    std::vector<std::uint8_t> removed_mask(sys.size(), 0);
    for (Atom b : U.base.members()) {
        bool hit = false;
        for_each_column_atom(sys, b, N, [&](Atom x) { hit = hit || vmask[x]; });
        if (hit) {
            ++removed_columns;
            for_each_column_atom(sys, b, N, [&](Atom x) { removed_mask[x] = 1; });
        } else {
            kept.push_back(b);
        }
    }
    // Blocks of side N inside each side-H column: offsets N * k, k in {0..H/N-1}^d.
    const std::size_t q = H / N;
    for (Atom b : Vz.members()) {
        GroupElement k(d, 0);
        for (std::size_t cnt = 0, total = side_power(q, d); cnt < total; ++cnt) {
            GroupElement w(d);
            for (int i = 0; i < d; ++i) w[i] = k[i] * static_cast<std::int64_t>(N);
            rebased.push_back(sys.apply(w, b));
            for (int i = d - 1; i >= 0; --i) {
                if (++k[i] < static_cast<std::int64_t>(q)) break;
                k[i] = 0;
            }
        }
    }
    const std::size_t added_blocks = rebased.size();
    kept.insert(kept.end(), rebased.begin(), rebased.end());
    Tower out = make_tower(sys, N, AtomSet(sys, std::move(kept)));
    if (ledger) {
        ledger->mu_U = U.measure();
        ledger->removed = mass_of(sys, removed_mask);
        ledger->added = mass_of(sys, vmask);
        ledger->mu_result = out.measure();
        std::vector<std::uint8_t> both(sys.size(), 0);
        const auto um = tower_set(sys, U).mask(sys.size());
        for (std::size_t x = 0; x < both.size(); ++x) both[x] = um[x] && vmask[x];
        ledger->overlap = mass_of(sys, both);
        ledger->removed_columns = removed_columns;
        ledger->added_blocks = added_blocks;
    }
    return out;
}

// ------------------------------------------------------------------ Z^d build

std::size_t default_aux_side(const FiniteSystem& sys, std::size_t N, double eps) {
    std::size_t H = N * static_cast<std::size_t>(std::ceil(10.0 / eps));
    const std::size_t pmin = *std::min_element(sys.dims().begin(), sys.dims().end());
    H = std::min(H, pmin);
    return H / N * N;
}

TowerBuild build_tower_zd(const FiniteSystem& sys, std::size_t N, double eps, std::size_t H, std::size_t max_iters,
                          std::uint64_t seed) {
    if (!sys.is_torus()) throw Error("build_tower_zd needs a torus system");
    if (!sys.ergodic()) throw Error("build_tower_zd needs an ergodic system");
    if (N < 1) throw Error("build_tower_zd: N must be at least 1");
    if (!(eps > 0.0 && eps < 1.0)) throw Error("build_tower_zd: eps must lie in (0, 1)");
    const int d = sys.dimension();
    TowerBuild res;
    if (std::all_of(sys.dims().begin(), sys.dims().end(), [N](std::size_t m) { return m % N == 0; })) {
        std::vector<Atom> base;
        for (std::size_t x = 0; x < sys.size(); ++x) {
            const auto c = sys.coords(static_cast<Atom>(x));
            if (std::all_of(c.begin(), c.end(), [N](std::int64_t v) { return v % static_cast<std::int64_t>(N) == 0; }))
                base.push_back(static_cast<Atom>(x));
        }
        res.tower = make_tower(sys, N, AtomSet(sys, std::move(base)));
        res.lattice = true;
        res.reached = res.tower.measure() > 1.0 - eps;
        res.H = N;
        return res;
    }
    if (H == 0) H = default_aux_side(sys, N, eps);
    if (H < N || H % N != 0)
        throw Error("build_tower_zd: auxiliary side H = " + std::to_string(H) + " must be a positive multiple of N");
    res.H = H;
    Tower U = tower_exists(sys, N, 0);
    const Tower V = tower_exists(sys, H, 0);
    const AtomSet Vset = tower_set(sys, V);
    Tower best = U;
    res.trace.push_back({0, U.measure(), 0.0, U.measure(), 0.0, GroupElement(d, 0)});
    for (std::size_t it = 1; it <= max_iters && !(U.measure() > 1.0 - eps); ++it) {
        ShiftResult sr;
        try {
            sr = overlap_shift_search(sys, tower_set(sys, U), Vset, eps, seed + it);
        } catch (const Error&) {
            break;
        }
        MergeLedger lg{};
        Tower next = tower_merge_step(sys, U, V, sr.z, &lg);
        res.trace.push_back({it, next.measure(), lg.removed, lg.added, lg.overlap, sr.z});
        const bool stalled = next.base.members() == U.base.members();
        U = std::move(next);
        if (U.measure() > best.measure()) best = U;
        if (stalled) break;
    }
    res.tower = best;
    res.reached = best.measure() > 1.0 - eps;
    if (!res.reached)
        throw TowerBuildFailure("build_tower_zd: reached mu = " + std::to_string(best.measure()) + " < 1 - eps after " +
                                    std::to_string(res.trace.size() - 1) + " iterations",
                                res);
    return res;
}

}  // namespace ergolab
