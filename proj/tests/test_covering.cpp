#include <doctest.h>

#include "ergolab/covering.hpp"
#include "oracles.hpp"

using namespace ergolab;

namespace {

long double block_sum(const FiniteSystem& sys, const Observable& f, Atom start, std::size_t side) {
    long double s = 0;
    oracle::for_each_point(sys.dimension(), 0, static_cast<std::int64_t>(side) - 1,
                           [&](const GroupElement& w) { s += f[oracle::walk(sys, w, start)]; });
    return s;
}

std::vector<Cube> random_candidates(Rng& rng, int d, std::size_t H, std::size_t smax, double density) {
    std::vector<Cube> out;
    std::size_t cells = 1;
    for (int k = 0; k < d; ++k) cells *= H;
    for (std::size_t c = 0; c < cells; ++c) {
        if (rng.uniform() >= density) continue;
        Cube q;
        q.corner.assign(static_cast<std::size_t>(d), 0);
        std::size_t rest = c;
        for (int k = d - 1; k >= 0; --k) {
            q.corner[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(rest % H);
            rest /= H;
        }
        q.side = 1 + rng.below(smax);  // may leave the window
        out.push_back(q);
    }
    return out;
}

bool disjoint_inside(int d, std::size_t H, const std::vector<Cube>& cubes, std::size_t& covered) {
    std::size_t cells = 1;
    for (int k = 0; k < d; ++k) cells *= H;
    std::vector<int> hit(cells, 0);
    covered = 0;
    for (const auto& q : cubes) {
        bool ok = true;
        oracle::for_each_point(d, 0, static_cast<std::int64_t>(q.side) - 1, [&](const GroupElement& w) {
            std::size_t idx = 0;
            for (int k = 0; k < d; ++k) {
                const auto v = q.corner[static_cast<std::size_t>(k)] + w[static_cast<std::size_t>(k)];
                if (v < 0 || v >= static_cast<std::int64_t>(H)) ok = false;
                idx = idx * H + static_cast<std::size_t>(std::clamp<std::int64_t>(v, 0, static_cast<std::int64_t>(H) - 1));
            }
            if (ok && hit[idx]++) ok = false;
            ++covered;
        });
        if (!ok) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("first passage agrees with the naive oracle") {
    Rng rng(51);
    const std::vector<FiniteSystem> systems = {FiniteSystem::cycle(300), FiniteSystem::torus({13, 11}),
                                               FiniteSystem::permutation(oracle::random_permutation(rng, 200))};
    for (const auto& sys : systems) {
        const auto f = random_observable(sys, rng);
        for (int t = 0; t < 40; ++t) {
            const Atom x = static_cast<Atom>(rng.below(sys.size()));
            const double s = rng.uniform(0.01, 0.6);
            const std::size_t Lmin = 1 + rng.below(3), Lcap = Lmin + rng.below(sys.dimension() == 1 ? 60 : 8);
            CAPTURE(s);
            const auto got = first_passage(sys, f, x, {s, Lcap, Lmin});
            const auto ref = oracle::first_passage(sys, f, x, s, Lmin, Lcap);
            CHECK(got == ref);
        }
    }
}

TEST_CASE("greedy cube selection: disjoint, inside, and within 3^d of the optimum") {
    Rng rng(52);
    for (int d = 1; d <= 2; ++d)
        for (int t = 0; t < 60; ++t) {
            const std::size_t H = 2 + rng.below(5);
            const auto cand = random_candidates(rng, d, H, 1 + rng.below(H), rng.uniform(0.2, 1.0));
            const std::size_t opt = oracle::exact_max_cover(d, H, cand);
            for (auto strat : {SelectionStrategy::Lexicographic, SelectionStrategy::LargestFirst}) {
                const auto sel = greedy_cube_selection(d, H, cand, strat);
                std::size_t covered = 0;
                CHECK(disjoint_inside(d, H, sel.selected, covered));
                CHECK(covered == sel.covered_cells);
                CHECK(sel.fraction == doctest::Approx(static_cast<double>(covered) / std::pow(H, d)));
                CHECK(static_cast<double>(sel.covered_cells) * std::pow(3.0, d) >= static_cast<double>(opt));
                CHECK(sel.covered_cells <= opt);
            }
        }
}

TEST_CASE("lexicographic selection scans by southwest vertex") {
    const std::vector<Cube> cand = {{{1}, 3}, {{0}, 2}, {{2}, 1}, {{4}, 5}};
    const auto sel = greedy_cube_selection(1, 6, cand);
    REQUIRE(sel.selected.size() == 2);
    CHECK(sel.selected[0].corner == std::vector<std::int64_t>{0});
    CHECK(sel.selected[1].corner == std::vector<std::int64_t>{2});
    CHECK(sel.discarded == 1);
    const auto big = greedy_cube_selection(1, 6, cand, SelectionStrategy::LargestFirst);
    CHECK(big.covered_cells == 3);
}

TEST_CASE("1-d heavy partition: minimal heavy blocks in order") {
    Rng rng(53);
    const auto sys = FiniteSystem::cycle(5000);
    const auto f = random_observable(sys, rng, -1.0, 1.2);
    const HeavyOrbitParams params{0.3, 40, 3};
    const auto res = greedy_heavy_partition_1d(sys, f, params, 17, 2000);
    CHECK(!res.selected.empty());
    std::size_t prev_end = 0;
    for (const auto& b : res.selected) {
        const std::size_t off = (b.start + 5000 - 17) % 5000;
        CHECK(off >= prev_end);
        CHECK(off + b.side <= 2000);
        prev_end = off + b.side;
        CHECK(block_sum(sys, f, b.start, b.side) / b.side > 0.3L);
        // The anchor is the atom before the block, and the side is minimal.
        const Atom anchor = sys.step(0, b.start, true);
        CHECK(oracle::first_passage(sys, f, anchor, 0.3, 3, 40) == b.side);
    }
    CHECK(res.fraction == doctest::Approx(res.Y.measure() / 0.4));
}

TEST_CASE("Y_N on a cycle: heavy blocks inside the tower") {
    Rng rng(54);
    const auto sys = FiniteSystem::cycle(20000);
    const auto f = random_zero_mean(sys, rng);
    const auto tower = rokhlin_tower_1d(sys, 1000, 0.5).tower;
    const auto tmask = tower_set(sys, tower).mask(sys.size());
    for (std::size_t N : {10, 100}) {
        const std::size_t L = std::max<std::size_t>(1, N / 10);
        const auto rep = build_Y_N(sys, f, 0.1, L, N, tower);
        long double tot = 0;
        for (const auto& b : rep.blocks) {
            CHECK(b.side >= L);
            CHECK(b.side <= N);
            const auto s = block_sum(sys, f, b.start, b.side);
            CHECK(s / b.side > 0.1L);
            tot += s;
            for (std::size_t i = 0; i < b.side; ++i) CHECK(tmask[sys.apply({static_cast<std::int64_t>(i)}, b.start)]);
        }
        CHECK(rep.mu_Y == doctest::Approx(rep.Y.measure()));
        if (!rep.Y.empty()) {
            CHECK(rep.normalized_integral > 0.1);
            CHECK(static_cast<double>(tot / sys.size()) == doctest::Approx(rep.integral));
        }
        CHECK(rep.uncovered == doctest::Approx(tower.measure() - rep.mu_Y));
    }
}

TEST_CASE("Y_N on a torus uses heavy cubes") {
    Rng rng(55);
    const auto sys = FiniteSystem::torus({36, 36});
    const auto f = random_zero_mean(sys, rng);
    const auto tower = build_tower_zd(sys, 12, 0.01).tower;
    const auto rep = build_Y_N(sys, f, 0.05, 2, 4, tower);
    for (const auto& b : rep.blocks) CHECK(block_sum(sys, f, b.start, b.side) / (b.side * b.side) > 0.05L);
    CHECK(rep.mu_Y <= tower.measure() + 1e-12);
}

TEST_CASE("almost-invariance profile matches direct symmetric differences") {
    Rng rng(56);
    const auto sys = FiniteSystem::torus({9, 11});
    std::vector<Atom> v;
    for (Atom x = 0; x < sys.size(); ++x)
        if (rng.uniform() < 0.3) v.push_back(x);
    const AtomSet Y(sys, v);
    const std::vector<GroupElement> shifts = {{1, 0}, {0, 1}, {2, -3}};
    const auto prof = almost_invariance_profile(sys, Y, shifts);
    for (std::size_t i = 0; i < shifts.size(); ++i)
        CHECK(prof[i] == doctest::Approx(symmetric_difference(Y, translate_set(sys, shifts[i], Y), sys).measure()));
}

TEST_CASE("minimum-length suggestion reaches the requested candidate coverage") {
    Rng rng(57);
    const auto sys = FiniteSystem::cycle(10000);
    const auto f = random_zero_mean(sys, rng);
    const auto tower = rokhlin_tower_1d(sys, 1000, 0.5).tower;
    const std::size_t L = suggest_min_length(sys, f, 0.05, 200, tower, 0.5);
    CHECK(L >= 1);
    CHECK(L <= 200);
    CHECK(build_Y_N(sys, f, 0.05, L, 200, tower).candidate_fraction >= 0.5 - 1e-12);
}

TEST_CASE("hand-traced heavy blocks on Z_20") {
    const auto sys = FiniteSystem::cycle(20);
    std::vector<double> v(20, 0.0);
    v[4] = 3.0;
    v[8] = -2.0;
    v[10] = 2.0;
    const Observable f(v);
    const auto res = greedy_heavy_partition_1d(sys, f, {0.5, 3, 1}, 0, 20);
    REQUIRE(res.selected.size() == 2);
    CHECK(res.selected[0].start == 2);
    CHECK(res.selected[0].side == 3);
    CHECK(res.selected[1].start == 9);
    CHECK(res.selected[1].side == 2);
    CHECK(res.Y.size() == 5);
}

TEST_CASE("hand-traced window of pairs") {
    std::vector<Cube> cand;
    for (std::int64_t c = 0; c < 10; ++c) cand.push_back({{c}, 2});
    const auto sel = greedy_cube_selection(1, 10, cand);
    REQUIRE(sel.selected.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(sel.selected[i].corner == std::vector<std::int64_t>{2 * static_cast<std::int64_t>(i)});
    CHECK(sel.fraction == 1.0);
}
