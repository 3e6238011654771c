#include <doctest.h>

#include "ergolab/towers.hpp"
#include "oracles.hpp"

using namespace ergolab;

namespace {

// Every atom in exactly one floor or in the residual.
bool partitions(const FiniteSystem& sys, const Tower& t) {
    std::vector<int> hits(sys.size(), 0);
    for (Atom b : t.base.members()) for_each_column_atom(sys, b, t.side, [&](Atom x) { ++hits[x]; });
    for (Atom x : t.residual.members()) ++hits[x];
    for (int h : hits)
        if (h != 1) return false;
    return true;
}

AtomSet random_set(const FiniteSystem& sys, Rng& rng, double p) {
    std::vector<Atom> v;
    for (Atom x = 0; x < sys.size(); ++x)
        if (rng.uniform() < p) v.push_back(x);
    if (v.empty()) v.push_back(static_cast<Atom>(rng.below(sys.size())));
    return AtomSet(sys, v);
}

}  // namespace

TEST_CASE("Kakutani columns match brute-force first returns") {
    Rng rng(41);
    for (int t = 0; t < 40; ++t) {
        const std::size_t M = 2 + rng.below(3000);
        const auto sys = t % 2 ? FiniteSystem::cycle(M)
                               : FiniteSystem::permutation(oracle::random_cyclic_permutation(rng, M));
        const auto D = random_set(sys, rng, 0.02);
        const auto part = kakutani_partition(sys, D);
        const auto inD = D.mask(M);
        std::vector<int> hits(M, 0);
        std::size_t base_atoms = 0;
        for (std::size_t c = 0; c < part.columns.size(); ++c) {
            const auto& col = part.columns[c];
            if (c) CHECK(col.height > part.columns[c - 1].height);
            for (Atom b : col.base.members()) {
                CHECK(inD[b]);
                CHECK(oracle::first_return(sys, inD, b) == col.height);
                Atom x = b;
                for (std::size_t i = 0; i < col.height; ++i, x = sys.step(0, x)) ++hits[x];
                ++base_atoms;
            }
        }
        CHECK(base_atoms == D.size());
        CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    }
}

TEST_CASE("Kakutani partition needs an ergodic system and a nonempty base") {
    const auto sys = FiniteSystem::permutation({1, 0, 2});
    CHECK_THROWS_AS(kakutani_partition(sys, AtomSet(sys, {0})), Error);
    const auto c = FiniteSystem::cycle(5);
    CHECK_THROWS_AS(kakutani_partition(c, AtomSet::empty(c)), Error);
}

TEST_CASE("Rokhlin tower: disjoint floors and small residual") {
    for (std::size_t M : {1000, 9973, 100000}) {
        const auto sys = FiniteSystem::cycle(M);
        for (auto [n, eps] : std::vector<std::pair<std::size_t, double>>{{7, 0.05}, {37, 0.01}, {100, 0.2}}) {
            const auto rep = rokhlin_tower_1d(sys, n, eps);
            CHECK(rep.tower.side == n);
            CHECK(floors_disjoint(sys, n, rep.tower.base));
            CHECK(partitions(sys, rep.tower));
            CHECK(rep.tower.residual.measure() < eps);
            CHECK(rep.k_target == static_cast<std::size_t>(std::floor(n / eps)) + 1);
        }
    }
    // Random D on a random single-cycle permutation.
    Rng rng(42);
    const auto sys = FiniteSystem::permutation(oracle::random_cyclic_permutation(rng, 5000));
    const auto rep = rokhlin_tower_1d(sys, 10, 0.05, random_set(sys, rng, 0.001));
    CHECK(partitions(sys, rep.tower));
    CHECK(rep.tower.residual.measure() < 0.05);
}

TEST_CASE("Rokhlin tower fails loudly when the target is impossible") {
    const auto sys = FiniteSystem::cycle(100);
    CHECK_THROWS_AS(rokhlin_tower_1d(sys, 30, 0.05), Error);  // 100 mod 30 = 10 atoms left over
    CHECK_THROWS_AS(rokhlin_tower_1d(sys, 200, 0.5), Error);
}

TEST_CASE("make_tower rejects overlapping floors") {
    const auto sys = FiniteSystem::cycle(20);
    CHECK_NOTHROW(make_tower(sys, 5, AtomSet(sys, {0, 5, 10})));
    CHECK_THROWS_AS(make_tower(sys, 5, AtomSet(sys, {0, 3})), Error);
    const auto t = FiniteSystem::torus({6, 6});
    const auto tw = make_tower(t, 3, AtomSet(t, {t.atom({0, 0}), t.atom({3, 3})}));
    CHECK(tower_set(t, tw).size() == 18);
    CHECK(tw.measure() == doctest::Approx(0.5));
    CHECK_FALSE(floors_disjoint(t, 3, AtomSet(t, {t.atom({0, 0}), t.atom({2, 2})})));
}

TEST_CASE("overlap search returns the lexicographically first minimizer") {
    Rng rng(43);
    for (int t = 0; t < 20; ++t) {
        const auto sys = t % 2 ? FiniteSystem::torus({6 + rng.below(5), 5 + rng.below(6)}) : FiniteSystem::cycle(50 + rng.below(60));
        const auto U = random_set(sys, rng, 0.4), V = random_set(sys, rng, 0.2);
        const auto res = overlap_shift_search(sys, U, V, 1.0);
        const auto mU = U.mask(sys.size());
        std::size_t best = SIZE_MAX;
        GroupElement best_z;
        std::vector<std::int64_t> hi;
        for (auto m : sys.dims()) hi.push_back(static_cast<std::int64_t>(m));
        // Lexicographic enumeration of shifts in [0, M_i).
        GroupElement z(sys.dims().size(), 0);
        while (true) {
            std::size_t c = 0;
            for (Atom v : V.members()) c += mU[sys.apply(z, v)];
            if (c < best) {
                best = c;
                best_z = z;
            }
            int a = static_cast<int>(z.size()) - 1;
            while (a >= 0 && z[a] == hi[a] - 1) z[a--] = 0;
            if (a < 0) break;
            ++z[a];
        }
        CHECK(res.exhaustive);
        CHECK(res.z == best_z);
        CHECK(res.overlap == doctest::Approx(static_cast<double>(best) / sys.size()));
        CHECK(res.overlap <= U.measure() * V.measure() + 1e-12);
    }
}

TEST_CASE("sampled overlap search is seeded") {
    const auto sys = FiniteSystem::torus({40, 40});
    Rng rng(44);
    const auto U = random_set(sys, rng, 0.3), V = random_set(sys, rng, 0.05);
    const auto a = overlap_shift_search(sys, U, V, 0.05, 7, 100, 64);
    const auto b = overlap_shift_search(sys, U, V, 0.05, 7, 100, 64);
    CHECK_FALSE(a.exhaustive);
    CHECK(a.z == b.z);
    CHECK(a.overlap == b.overlap);
}

TEST_CASE("merge step bookkeeping") {
    const auto sys = FiniteSystem::torus({24, 24});
    const auto U = make_tower(sys, 2, AtomSet(sys, {sys.atom({0, 0}), sys.atom({10, 10})}));
    const auto V = make_tower(sys, 6, AtomSet(sys, {sys.atom({0, 0})}));
    MergeLedger led{};
    const auto W = tower_merge_step(sys, U, V, {1, 1}, &led);
    CHECK(floors_disjoint(sys, 2, W.base));
    CHECK(partitions(sys, W));
    CHECK(led.mu_result == doctest::Approx(led.mu_U - led.removed + led.added));
    CHECK(led.mu_result == doctest::Approx(W.measure()));
    CHECK(led.removed_columns == 1);  // the column at the origin meets T^(1,1) V
    CHECK(led.added_blocks == 9);
    CHECK_THROWS_AS(tower_merge_step(sys, U, make_tower(sys, 5, AtomSet(sys, {0})), {0, 0}), Error);
}

TEST_CASE("tower existence and lattice builds") {
    const auto sys = FiniteSystem::torus({12, 18});
    const auto b = build_tower_zd(sys, 3, 0.01);
    CHECK(b.lattice);
    CHECK(b.reached);
    CHECK(b.tower.residual.empty());
    CHECK(partitions(sys, b.tower));
    CHECK_THROWS_AS(tower_exists(FiniteSystem::torus({5, 3}), 4), Error);
    const auto t = tower_exists(FiniteSystem::torus({5, 7}), 4);
    CHECK(t.base.size() == 1);
}

TEST_CASE("non-lattice Z^2 tower reaches the target with a consistent trace") {
    const auto sys = FiniteSystem::torus({41, 43});
    const auto b = build_tower_zd(sys, 3, 0.15);
    CHECK_FALSE(b.lattice);
    CHECK(b.reached);
    CHECK(b.tower.measure() > 0.85);
    CHECK(partitions(sys, b.tower));
    CHECK(b.H % 3 == 0);
    for (std::size_t i = 1; i < b.trace.size(); ++i)
        CHECK(b.trace[i].mu == doctest::Approx(b.trace[i - 1].mu - b.trace[i].removed + b.trace[i].added));
    CHECK(default_aux_side(sys, 3, 0.15) == b.H);
}

TEST_CASE("unreachable tower targets raise with the partial trace") {
    const auto sys = FiniteSystem::torus({11, 13});
    try {
        build_tower_zd(sys, 4, 1e-6, 0, 3);
        FAIL("expected TowerBuildFailure");
    } catch (const TowerBuildFailure& e) {
        CHECK_FALSE(e.result.reached);
        CHECK(!e.result.trace.empty());
    }
}
