#include <doctest.h>

#include "ergolab/distributions.hpp"
#include "oracles.hpp"

using namespace ergolab;

TEST_CASE("from_atoms sorts, merges close values and drops zero masses") {
    const auto d = EmpiricalDistribution::from_atoms({{2.0, 0.25}, {1.0, 0.25}, {1.0 + 5e-13, 0.25}, {3.0, 0.0}, {0.0, 0.25}});
    CHECK(d.size() == 3);
    CHECK(d.x() == std::vector<double>{0.0, 1.0, 2.0});
    CHECK(d.masses()[1] == doctest::Approx(0.5));
    CHECK_THROWS_AS(EmpiricalDistribution::from_atoms({{0.0, 0.5}}), Error);
    CHECK_THROWS_AS(EmpiricalDistribution::from_atoms({{NAN, 1.0}}), Error);
    CHECK_THROWS_AS(EmpiricalDistribution::from_atoms({{0.0, -0.5}, {1.0, 1.5}}), Error);
}

TEST_CASE("law of an observable") {
    const auto sys = FiniteSystem::permutation({1, 0, 2, 3}, {0.125, 0.125, 0.25, 0.5});
    const Observable f(std::vector<double>{2.0, 2.0, -1.0, 0.5});
    const auto L = law(sys, f);
    CHECK(L.x() == std::vector<double>{-1.0, 0.5, 2.0});
    CHECK(L.masses()[2] == doctest::Approx(0.25));
    CHECK(L.mean() == doctest::Approx(integrate(sys, f)));
    CHECK(L.abs_mean() == doctest::Approx(0.25 + 0.25 + 0.5));
    const auto S = L.scaled(-2.0);
    CHECK(S.x().front() == -4.0);
    CHECK(S.mean() == doctest::Approx(-2.0 * L.mean()));
}

TEST_CASE("joint law and marginals") {
    const auto sys = FiniteSystem::cycle(4);
    const Observable f(std::vector<double>{0, 0, 1, 1}), g(std::vector<double>{0, 1, 0, 1});
    const auto J = joint_law(sys, f, g);
    CHECK(J.dimension() == 2);
    CHECK(J.size() == 4);
    CHECK(bl_distance(J, product(J.marginal_x(), J.marginal_y())) < 1e-15);
    const auto K = joint_law(sys, f, f);
    CHECK(bl_distance(K, product(K.marginal_x(), K.marginal_y())) > 0.1);
}

TEST_CASE("quantile is the left-continuous inverse CDF") {
    const auto d = EmpiricalDistribution::from_atoms({{-1.0, 0.25}, {0.0, 0.5}, {3.0, 0.25}});
    CHECK(quantile(d, 0.1) == -1.0);
    CHECK(quantile(d, 0.25) == -1.0);
    CHECK(quantile(d, 0.26) == 0.0);
    CHECK(quantile(d, 0.75) == 0.0);
    CHECK(quantile(d, 0.99) == 3.0);
    CHECK_THROWS_AS(quantile(d, 0.0), Error);
    CHECK_THROWS_AS(quantile(d, 1.0), Error);
    const auto u = EmpiricalDistribution::uniform_grid(-1.0, 1.0, 4);
    CHECK(u.x() == std::vector<double>{-0.75, -0.25, 0.25, 0.75});
}

TEST_CASE("closed-form distances") {
    const auto a = EmpiricalDistribution::point_mass(0.0);
    CHECK(w1_distance(a, EmpiricalDistribution::point_mass(0.3)) == doctest::Approx(0.3));
    CHECK(bl_distance(a, EmpiricalDistribution::point_mass(0.3)) == doctest::Approx(0.3));
    // Far apart point masses: BL saturates at 2.
    CHECK(bl_distance(a, EmpiricalDistribution::point_mass(5.0)) == doctest::Approx(2.0));
    CHECK(w1_distance(a, EmpiricalDistribution::point_mass(5.0)) == doctest::Approx(5.0));
    const auto r = EmpiricalDistribution::from_atoms({{-1.0, 0.5}, {1.0, 0.5}});
    CHECK(bl_distance(r, a) == doctest::Approx(1.0));
    CHECK(w1_distance(r, a) == doctest::Approx(1.0));
}

TEST_CASE("1-d BL matches the grid dynamic-programming oracle") {
    Rng rng(31);
    for (int t = 0; t < 300; ++t) {
        const auto a = oracle::random_law(rng, 1 + rng.below(12), -3.0, 3.0, true);
        const auto b = oracle::random_law(rng, 1 + rng.below(12), -3.0, 3.0, true);
        CHECK(bl_distance(a, b) == doctest::Approx(oracle::bl_grid(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("W1 matches the quantile-integral oracle") {
    Rng rng(32);
    for (int t = 0; t < 300; ++t) {
        const auto a = oracle::random_law(rng, 1 + rng.below(30), -5.0, 5.0);
        const auto b = oracle::random_law(rng, 1 + rng.below(30), -2.0, 7.0);
        CHECK(w1_distance(a, b) == doctest::Approx(oracle::w1_quantile(a, b)).epsilon(1e-9));
    }
}

TEST_CASE("metric axioms and BL <= min(2, W1)") {
    Rng rng(33);
    for (int t = 0; t < 100; ++t) {
        const auto a = oracle::random_law(rng, 1 + rng.below(40), -4.0, 4.0);
        const auto b = oracle::random_law(rng, 1 + rng.below(40), -4.0, 4.0);
        const auto c = oracle::random_law(rng, 1 + rng.below(40), -4.0, 4.0);
        for (auto dist : {bl_distance, w1_distance}) {
            CHECK(dist(a, a) <= 1e-12);
            CHECK(std::fabs(dist(a, b) - dist(b, a)) <= 1e-9);
            CHECK(dist(a, c) <= dist(a, b) + dist(b, c) + 1e-9);
        }
        CHECK(bl_distance(a, b) <= std::min(2.0, w1_distance(a, b)) + 1e-9);
    }
}

TEST_CASE("BL on large laws is fast and consistent") {
    Rng rng(34);
    std::vector<std::pair<double, double>> va, vb;
    for (int i = 0; i < 200000; ++i) {
        va.emplace_back(rng.uniform(-1, 1), 1.0 / 200000);
        vb.emplace_back(rng.uniform(-1, 1) * 1.1, 1.0 / 200000);
    }
    const auto a = EmpiricalDistribution::from_atoms(va), b = EmpiricalDistribution::from_atoms(vb);
    const double bl = bl_distance(a, b), w = w1_distance(a, b);
    CHECK(bl <= w + 1e-9);
    CHECK(bl > 0.5 * w);  // all mass within the 1-Lipschitz regime
}

TEST_CASE("2-d BL lower bound behaves like a distance") {
    Rng rng(35);
    auto random2 = [&](std::size_t n, double shift) {
        std::vector<std::pair<std::pair<double, double>, double>> v;
        for (std::size_t i = 0; i < n; ++i) v.push_back({{rng.uniform(-1, 1) + shift, rng.uniform(-1, 1)}, 1.0 / n});
        return EmpiricalDistribution::from_atoms_2d(v);
    };
    for (int t = 0; t < 20; ++t) {
        const auto a = random2(50, 0.0), b = random2(60, 0.5);
        CHECK(bl_distance(a, a) <= 1e-12);
        CHECK(bl_distance(a, b) == doctest::Approx(bl_distance(b, a)));
        CHECK(bl_distance(a, b) <= 2.0);
        CHECK(bl_distance(a, b) > 0.0);
    }
    CHECK_THROWS_AS(bl_distance(random2(3, 0), EmpiricalDistribution::point_mass(0)), Error);
}

TEST_CASE("product coarsens large marginals") {
    const auto big = EmpiricalDistribution::uniform_grid(0.0, 1.0, 10000);
    const auto p = product(big, EmpiricalDistribution::point_mass(0.0), 100);
    CHECK(p.size() <= 100);
    CHECK(w1_distance(p.marginal_x(), big) <= 0.5 / 100 + 1e-12);
}
