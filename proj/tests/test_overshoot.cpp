#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cmj/overshoot.hpp"
#include "cmj/stats.hpp"
#include "test_helpers.hpp"

using namespace cmj;

namespace {

LevyModel markov() { return {2.0, LifespanDistribution::exponential(1.0)}; }
LevyModel det2() { return {1.0, LifespanDistribution::deterministic(2.0)}; }

}  // namespace

TEST_CASE("memoryless overshoot density collapses to the lifetime law", "[overshoot]") {
    const auto m = markov();
    const auto tbl = build_scale_table(m, 3.0, 1e-3);
    CHECK(overshoot_density(m, tbl, 3.0, 1.0) == Catch::Approx(std::exp(-1.0)).margin(2e-6));
    for (double x : {0.2, 0.8, 2.5})
        CHECK(overshoot_density(m, tbl, 3.0, x) == Catch::Approx(std::exp(-x)).margin(2e-6));
    CHECK(overshoot_density(m, tbl, 3.0, -1.0) == 0.0);
}

TEST_CASE("deterministic overshoot density: support and normalization", "[overshoot]") {
    const auto m = det2();
    // densities live on open intervals; integrate with midpoint cells
    auto midpoint_mass = [&](const ScaleTable& tbl, double u, double lo, double hi, int n) {
        double mass = 0.0;
        const double w = (hi - lo) / n;
        for (int j = 0; j < n; ++j)
            mass += overshoot_density(m, tbl, u, lo + w * (j + 0.5));
        return mass * w;
    };
    SECTION("u above v0: support (0, v0)") {
        const auto tbl = build_scale_table(m, 3.0, 1e-3);
        CHECK(overshoot_density(m, tbl, 3.0, 2.1) == 0.0);
        CHECK(overshoot_density(m, tbl, 3.0, 1.0) > 0.0);
        CHECK(std::fabs(midpoint_mass(tbl, 3.0, 0.0, 2.0, 2000) - 1.0) < 1e-6);
    }
    SECTION("u below v0: support (v0-u, v0)") {
        const auto tbl = build_scale_table(m, 1.0, 1e-3);
        CHECK(overshoot_density(m, tbl, 1.0, 0.5) == 0.0);
        CHECK(overshoot_density(m, tbl, 1.0, 1.5) > 0.0);
        CHECK(std::fabs(midpoint_mass(tbl, 1.0, 1.0, 2.0, 2000) - 1.0) < 1e-6);
    }
}

TEST_CASE("exponential-case overshoot normalization", "[overshoot]") {
    const auto m = markov();
    const auto tbl = build_scale_table(m, 5.0, 1e-3);
    const double mass = testutil::integrate(
        [&](double x) { return x <= 0.0 ? 0.0 : overshoot_density(m, tbl, 5.0, x); }, 0.0, 40.0,
        1e-10);
    CHECK(std::fabs(mass - 1.0) < 1e-6);
}

TEST_CASE("overshoot density approaches the tilted-Upsilon limit", "[overshoot]") {
    SECTION("Markov, u = 20, within 1e-4") {
        const auto m = markov();
        const auto tbl = build_scale_table(m, 20.0, 1e-3);
        double dev = 0.0;
        for (double x = 0.05; x <= 10.0; x += 0.1)
            dev = std::max(dev, std::fabs(overshoot_density(m, tbl, 20.0, x) -
                                          overshoot_limit_density(m, x)));
        CHECK(dev <= 1e-4);
    }
    SECTION("deterministic, large u") {
        const auto m = det2();
        const auto tbl = build_scale_table(m, 25.0, 1e-3);
        double dev = 0.0;
        for (double x = 0.05; x < 2.0; x += 0.05)
            dev = std::max(dev, std::fabs(overshoot_density(m, tbl, 25.0, x) -
                                          overshoot_limit_density(m, x)));
        CHECK(dev <= 1e-3);
    }
}

TEST_CASE("limit density integrates to one for every finite variant", "[overshoot]") {
    for (const auto& m : {markov(), det2(), LevyModel(2.0, LifespanDistribution::uniform(0.0, 2.0)),
                          LevyModel(1.5, LifespanDistribution::gamma(2.0, 1.0))}) {
        const auto& d = m.lifespan();
        const double hi = d.upper_point(1e-16);
        std::vector<double> cuts{0.0};
        if (d.kind() == LifespanDistribution::Kind::Deterministic) cuts.push_back(d.param_a());
        else if (d.kind() == LifespanDistribution::Kind::Uniform) {
            if (d.param_a() > 0.0) cuts.push_back(d.param_a());
            cuts.push_back(d.param_b());
        } else cuts.push_back(hi);
        const double mass = testutil::integrate_segments(
            [&](double x) { return overshoot_limit_density(m, x); }, cuts, 1e-12);
        INFO(d.spec_string());
        CHECK(std::fabs(mass - 1.0) < 1e-8);
    }
}

TEST_CASE("infinite lifetimes have no overshoot density", "[overshoot]") {
    const LevyModel y(1.0, LifespanDistribution::infinite());
    const auto tbl = build_scale_table(y, 2.0, 1e-3);
    CHECK_THROWS_AS(overshoot_density(y, tbl, 2.0, 1.0), UnsupportedLifespan);
    CHECK_THROWS_AS(overshoot_limit_density(y, 1.0), UnsupportedLifespan);
    CHECK_THROWS_AS(OvershootSampler(y, tbl, 2.0), UnsupportedLifespan);
}

TEST_CASE("overshoot sampler draws from the tabulated law", "[overshoot][.slow]") {
    SECTION("memoryless: samples are Exponential(1)") {
        const auto m = markov();
        const auto tbl = build_scale_table(m, 5.0, 1e-3);
        const OvershootSampler sampler(m, tbl, 5.0);
        CHECK(std::fabs(sampler.total_mass() - 1.0) < 1e-3);
        Rng rng(71);
        std::vector<double> xs(100000);
        for (auto& x : xs) x = sampler.sample(rng);
        const auto ks = ks_test(xs, [](double v) { return v <= 0.0 ? 0.0 : 1.0 - std::exp(-v); });
        CHECK(ks.p_value > 0.01);
        // b int e^{-as} P(O > s) ds -> b psi'(a)/alpha = 1 here
        CHECK(sampler.exp_weighted_survival_integral(m.b()) == Catch::Approx(1.0).margin(2e-3));
    }
    SECTION("deterministic at u = 30") {
        const auto m = det2();
        const auto tbl = build_scale_table(m, 30.0, 1e-3);
        const OvershootSampler sampler(m, tbl, 30.0);
        CHECK(std::fabs(sampler.total_mass() - 1.0) < 1e-4);
        Rng rng(72);
        for (int i = 0; i < 10000; ++i) {
            const double x = sampler.sample(rng);
            CHECK(x >= 0.0);
            CHECK(x <= 2.0);
        }
        const double target = m.b() * m.psi_prime_alpha() / m.alpha();
        CHECK(sampler.exp_weighted_survival_integral(m.b()) ==
              Catch::Approx(target).epsilon(2e-3));
    }
}
