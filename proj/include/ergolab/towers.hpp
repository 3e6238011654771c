#pragma once
// Kakutani skyscrapers, Rokhlin towers and the iterative Z^d tower merge.
//
// A tower of side N over base B is the family of floors T^w B with
// w in {0, ..., N-1}^d; for d = 1 these are the floors B, TB, ..., T^{N-1}B.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "ergolab/space.hpp"

namespace ergolab {

struct KakutaniColumn {
    std::size_t height;
    AtomSet base;  // D_h
};

struct KakutaniPartition {
    AtomSet D;
    std::vector<KakutaniColumn> columns;  // increasing height
    std::size_t max_height() const { return columns.empty() ? 0 : columns.back().height; }
    std::size_t min_height() const { return columns.empty() ? 0 : columns.front().height; }
};

/// Return-time partition of a d = 1 ergodic system over D.
KakutaniPartition kakutani_partition(const FiniteSystem& sys, const AtomSet& D);

struct Tower {
    int d = 1;
    std::size_t side = 1;
    AtomSet base;
    AtomSet residual;
    double measure() const { return 1.0 - residual.measure(); }
};

/// Calls fn(atom) for every atom of the column over b, in row-major w order.
template <class Fn>
void for_each_column_atom(const FiniteSystem& sys, Atom b, std::size_t side, Fn fn);

/// Union of all floors.
AtomSet tower_set(const FiniteSystem& sys, const Tower& t);
/// Builds a tower from a base, checking that the floors are pairwise disjoint.
Tower make_tower(const FiniteSystem& sys, std::size_t side, AtomSet base);
/// True iff |union of floors| = side^d |B|.
bool floors_disjoint(const FiniteSystem& sys, std::size_t side, const AtomSet& base);

struct RokhlinReport {
    Tower tower;
    KakutaniPartition first, second;
    std::size_t k_target;   // floor(n/eps) + 1
    std::size_t k_used;     // minimal column height of the second pass
    double bound;           // n / k_used
};

/// Rokhlin tower of height n with mu(E) < eps. The first Kakutani pass is over
/// D (default {0}); the second over the union of columns of height >= k.
RokhlinReport rokhlin_tower_1d(const FiniteSystem& sys, std::size_t n, double eps,
                               std::optional<AtomSet> D = std::nullopt);

/// Single-atom seed tower of side N (requires N <= every period).
Tower tower_exists(const FiniteSystem& sys, std::size_t N, Atom b = 0);

struct ShiftResult {
    GroupElement z;
    double overlap;  // mu(U ∩ T^z V)
    double bound;    // mu(U) mu(V) + delta
    bool exhaustive;
};

/// Shift z minimizing mu(U ∩ T^z V): exhaustive FFT cross-correlation for
/// systems with at most `exhaustive_limit` atoms (lexicographically first
/// minimizer), otherwise the best of `samples` seeded random shifts. Throws
/// if the best shift found does not beat mu(U) mu(V) + delta.
ShiftResult overlap_shift_search(const FiniteSystem& sys, const AtomSet& U, const AtomSet& V, double delta,
                                 std::uint64_t seed = 0, std::size_t exhaustive_limit = 1'000'000,
                                 std::size_t samples = 4096);

struct MergeLedger {
    double mu_U, removed, added, mu_result, overlap;
    std::size_t removed_columns, added_blocks;
};

/// U (side N) merged with T^z V (side H, N | H): removes every U column that
/// meets T^z V, re-bases T^z V into (H/N)^d blocks of side N, unions bases.
Tower tower_merge_step(const FiniteSystem& sys, const Tower& U, const Tower& V, const GroupElement& z,
                       MergeLedger* ledger = nullptr);

struct TowerTraceRow {
    std::size_t iter;
    double mu, removed, added, overlap;
    GroupElement z;
};

struct TowerBuild {
    Tower tower;
    std::size_t H = 0;
    bool lattice = false;
    bool reached = false;
    std::vector<TowerTraceRow> trace;
};

struct TowerBuildFailure : Error {
    TowerBuildFailure(const std::string& msg, TowerBuild partial) : Error(msg), result(std::move(partial)) {}
    TowerBuild result;
};

/// Default auxiliary side: N * ceil(10 / eps), capped at the smallest period
/// and rounded down to a multiple of N.
std::size_t default_aux_side(const FiniteSystem& sys, std::size_t N, double eps);

/// Iterated overlap search + merge from a single-atom seed until
/// mu > 1 - eps. Throws TowerBuildFailure (carrying the trace) otherwise.
TowerBuild build_tower_zd(const FiniteSystem& sys, std::size_t N, double eps, std::size_t H = 0,
                          std::size_t max_iters = 1000, std::uint64_t seed = 0);

// ------------------------------------------------------------------ inline

template <class Fn>
void for_each_column_atom(const FiniteSystem& sys, Atom b, std::size_t side, Fn fn) {
    const int d = sys.dimension();
    if (!sys.is_torus()) {
        const std::size_t c = sys.cycle_of(b);
        const std::size_t off = sys.cycle_offsets()[c], len = sys.cycle_offsets()[c + 1] - off;
        std::size_t p = sys.position_in_cycle(b);
        for (std::size_t i = 0; i < side; ++i) {
            fn(sys.cycle_members()[off + p]);
            if (++p == len) p = 0;
        }
        return;
    }
    const auto& dims = sys.dims();
    std::size_t stride[16];
    std::size_t c0[16], c[16];
    stride[d - 1] = 1;
    for (int i = d - 2; i >= 0; --i) stride[i] = stride[i + 1] * dims[i + 1];
    for (int i = 0; i < d; ++i) {
        c0[i] = (b / stride[i]) % dims[i];
        c[i] = 0;
    }
    while (true) {
        std::size_t x = 0;
        for (int i = 0; i < d; ++i) {
            std::size_t v = c0[i] + c[i];
            v %= dims[i];
            x += v * stride[i];
        }
        fn(static_cast<Atom>(x));
        int i = d - 1;
        while (i >= 0 && ++c[i] == side) c[i--] = 0;
        if (i < 0) break;
    }
}

}  // namespace ergolab
