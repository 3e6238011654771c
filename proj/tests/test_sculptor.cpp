#include <doctest.h>

#include "ergolab/sculptor.hpp"
#include "golden.hpp"
#include "oracles.hpp"

using namespace ergolab;

namespace {

SculptConfig small_config() {
    SculptConfig c;
    c.J = 2;
    c.subtowers_per_axis = {8, 8};
    c.plateau_safety = 0.5;
    c.eps_tower = 0.05;
    return c;
}

EmpiricalDistribution rademacher() { return EmpiricalDistribution::from_atoms({{-1.0, 0.5}, {1.0, 0.5}}); }

}  // namespace

TEST_CASE("stage structure on a small cycle") {
    const auto sys = FiniteSystem::cycle(100000);
    const auto cfg = small_config();
    const auto plan = sculpt(sys, rademacher(), cfg);
    REQUIRE(plan.stages.size() == 2);
    CHECK_FALSE(plan.degenerate);
    std::vector<double> sum(sys.size(), 0.0);
    std::size_t period = 1;
    for (const auto& st : plan.stages) {
        CAPTURE(st.j);
        CHECK(st.n == st.K * st.h);
        CHECK(st.n % period == 0);
        period = std::lcm(period, st.n);
        CHECK(floors_disjoint(sys, st.n, st.tower.base));
        CHECK(st.E.measure() <= cfg.eps_tower / std::ldexp(1.0, static_cast<int>(st.j)) + 1e-12);
        CHECK(std::is_sorted(st.values.begin(), st.values.end()));
        CHECK(std::fabs(integrate(sys, st.function())) < 1e-12);
        CHECK(st.zero_mean_residual(sys) < 1e-12);
        CHECK(static_cast<double>(st.N) <= cfg.plateau_safety * static_cast<double>(st.h));
        CHECK(st.leakage <= st.leakage_limit);
        for (Atom x : st.E.members()) CHECK(st.function()[x] == doctest::Approx(st.residual_value));
        const auto g = st.function();
        for (std::size_t x = 0; x < sys.size(); ++x) sum[x] += g[x];
    }
    for (std::size_t x = 0; x < sys.size(); ++x) CHECK(plan.f[x] == doctest::Approx(sum[x]).epsilon(1e-12));
    for (std::size_t j = 1; j < plan.stages.size(); ++j) CHECK(tail_bound(plan, j) <= cfg.eta);
}

TEST_CASE("subtower values are the target quantiles at mid-ranks") {
    const auto sys = FiniteSystem::cycle(100000);
    const auto target = EmpiricalDistribution::uniform_grid(-1.0, 1.0, 1000);
    const auto st = build_stage(sys, 1, 2, 8, target, small_config(), 1);
    REQUIRE(st.values.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) CHECK(st.values[i] == quantile(target, (i + 0.5) / 8));
    // Along each column the floors climb through the subtowers in order.
    const Atom b = st.tower.base.members().front();
    for (std::size_t w = 0; w < st.n; ++w)
        CHECK(st.pattern[sys.apply({static_cast<std::int64_t>(w)}, b)] == st.values[w / st.h]);
}

TEST_CASE("reported distances match a recomputation") {
    const auto sys = FiniteSystem::cycle(100000);
    const auto plan = sculpt(sys, rademacher(), small_config());
    for (const auto& d : plan.distances) {
        const auto lw = normalized_law(plan, d.N);
        REQUIRE(lw);
        CHECK(d.w1 == doctest::Approx(w1_distance(*lw, plan.normalized)));
        CHECK(d.bl == doctest::Approx(bl_distance(*lw, plan.normalized)));
        CHECK(d.bl <= d.w1 + 1e-12);
        CHECK(lp_norm(*normalized_average(plan, d.N), sys, 1.0) == doctest::Approx(1.0));
    }
}

TEST_CASE("degenerate targets are flagged, not divided by zero") {
    const auto sys = FiniteSystem::cycle(100000);
    const auto plan = sculpt(sys, EmpiricalDistribution::point_mass(0.0), small_config());
    CHECK(plan.degenerate);
    for (const auto& d : plan.distances) CHECK(d.degenerate);
}

TEST_CASE("infeasible configurations fail with a stage diagnostic") {
    const auto sys = FiniteSystem::cycle(65536);
    try {
        sculpt(sys, rademacher(), small_config());
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("stage 2") != std::string::npos);
    }
    auto cfg = small_config();
    cfg.subtowers_per_axis = {8};
    CHECK_THROWS_AS(sculpt(sys, rademacher(), cfg), Error);
    cfg = small_config();
    cfg.decay = 1.5;
    CHECK_THROWS_AS(sculpt(sys, rademacher(), cfg), Error);
}

TEST_CASE("plateau profile and independence probes") {
    const auto sys = FiniteSystem::cycle(100000);
    const auto plan = sculpt(sys, rademacher(), small_config());
    const auto rows = plateau_profile(plan, 2, 4);
    REQUIRE(rows.size() == 4);
    CHECK(rows.front().n == plan.stages[1].N);
    CHECK(rows.front().bl == 0.0);
    CHECK(rows.back().n == plan.stages[1].R);
    for (const auto& r : rows) CHECK(r.bl <= r.w1 + 1e-12);
    CHECK_THROWS_AS(plateau_profile(plan, 3, 4), Error);
    const double p = independence_probe(plan, 1, 2);
    CHECK(p >= 0.0);
    CHECK(p <= 2.0);
    // A function against its own shift is far from independent.
    CHECK(independence_control(plan, 1, 1) > p);
    CHECK_THROWS_AS(independence_probe(plan, 1, 1), Error);
}

TEST_CASE("demo plan on a million-atom cycle is locked") {
    const auto sys = FiniteSystem::cycle(1000000);
    SculptConfig cfg;
    cfg.subtowers_per_axis = {32, 32, 32};
    cfg.plateau_safety = 0.5;
    cfg.eps_tower = 0.02;
    golden::Rows got;
    for (const auto& target : {rademacher(), EmpiricalDistribution::uniform_grid(-1.0, 1.0, 100000)}) {
        const auto plan = sculpt(sys, target, cfg);
        for (std::size_t j = 0; j < plan.stages.size(); ++j) {
            const auto& st = plan.stages[j];
            const auto& d = plan.distances[j];
            got.push_back({static_cast<double>(st.j), static_cast<double>(st.h), static_cast<double>(st.n),
                           static_cast<double>(st.N), st.amplitude, d.w1, d.bl, d.tail});
        }
    }
    const std::string name = "sculpt_demo.csv";
    if (golden::updating()) golden::write(name, "j,h,n,N,amplitude,w1,bl,tail", got);
    const auto ref = golden::read(name);
    REQUIRE(!ref.empty());
    CHECK(golden::max_rel_diff(got, ref) <= 1e-9);
}
