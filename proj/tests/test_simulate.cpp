#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cmj/parallel.hpp"
#include "cmj/scale.hpp"
#include "cmj/simulate.hpp"
#include "cmj/stats.hpp"
#include "test_helpers.hpp"

using namespace cmj;

namespace {

LevyModel markov() { return {2.0, LifespanDistribution::exponential(1.0)}; }
LevyModel yule() { return {1.0, LifespanDistribution::infinite()}; }

std::vector<PopulationSample> batch(const TreeSimConfig& cfg, std::size_t reps,
                                    std::uint64_t seed, unsigned threads) {
    return run_replicates<PopulationSample>(reps, threads, seed, [&cfg] {
        return [sim = TreeSimulator(cfg)](std::size_t, Rng& rng) mutable { return sim.run(rng); };
    });
}

}  // namespace

TEST_CASE("the root is alive at time zero", "[simulate]") {
    TreeSimConfig cfg{.model = markov(), .horizon = 2.0, .checkpoints = {0.0, 1.0}};
    TreeSimulator sim(cfg);
    for (int i = 0; i < 200; ++i) {
        Rng rng = Rng::substream(4, i);
        const auto& s = sim.run(rng);
        CHECK(s.counts[0] == 1);
        CHECK(s.total_individuals >= 1);
    }
}

TEST_CASE("population monotonicity after extinction", "[simulate]") {
    TreeSimConfig cfg{.model = markov(), .horizon = 4.0, .checkpoints = {1.0, 2.0, 3.0, 4.0}};
    TreeSimulator sim(cfg);
    for (int i = 0; i < 500; ++i) {
        Rng rng = Rng::substream(5, i);
        const auto& s = sim.run(rng);
        bool dead = false;
        for (const auto c : s.counts) {
            if (dead) CHECK(c == 0);
            if (c == 0) dead = true;
        }
        CHECK(s.counts.back() == s.alive_at_horizon);
    }
}

TEST_CASE("simulation is deterministic and thread-invariant", "[simulate]") {
    TreeSimConfig cfg{.model = markov(), .horizon = 3.0, .checkpoints = {1.0, 3.0}};
    const auto a = batch(cfg, 400, 99, 1);
    const auto b = batch(cfg, 400, 99, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].counts == b[i].counts);
        CHECK(a[i].total_individuals == b[i].total_individuals);
        CHECK(a[i].alive_at_horizon == b[i].alive_at_horizon);
    }
    // same seed, fresh simulator: identical draw
    Rng r1 = Rng::substream(7, 3), r2 = Rng::substream(7, 3);
    TreeSimulator s1(cfg), s2(cfg);
    CHECK(s1.run(r1).counts == s2.run(r2).counts);
}

TEST_CASE("config validation", "[simulate]") {
    CHECK_THROWS_AS(TreeSimulator({.model = markov(), .horizon = -1.0}), ConfigError);
    CHECK_THROWS_AS(TreeSimulator({.model = markov(), .horizon = 2.0, .checkpoints = {3.0}}),
                    ConfigError);
    CHECK_THROWS_AS(TreeSimulator({.model = markov(), .horizon = 2.0, .checkpoints = {1.5, 1.0}}),
                    ConfigError);
    TreeSimConfig both{.model = markov(), .horizon = 2.0};
    both.root_lifespan = 1.0;
    both.root_lifespan_sampler = [](Rng&) { return 1.0; };
    CHECK_THROWS_AS(TreeSimulator(both), ConfigError);
}

TEST_CASE("individual cap marks the sample truncated", "[simulate]") {
    TreeSimConfig cfg{.model = yule(), .horizon = 8.0, .checkpoints = {8.0}};
    cfg.max_individuals = 20;
    TreeSimulator sim(cfg);
    Rng rng = Rng::substream(1, 0);
    const auto& s = sim.run(rng);
    CHECK(s.truncated);
    CHECK(s.total_individuals == 20);
    CHECK_THROWS_AS(estimate_E(s, yule()), CapExceeded);
}

TEST_CASE("Yule population mean matches e^t", "[simulate][.slow]") {
    const auto m = yule();
    TreeSimConfig cfg{.model = m, .horizon = 3.0, .checkpoints = {3.0}};
    const auto samples = batch(cfg, 100000, 11, 2);
    std::vector<double> ns(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        ns[i] = static_cast<double>(samples[i].alive_at_horizon);
    const double mean = sample_mean(ns);
    const double se = std::sqrt(sample_variance(ns) / static_cast<double>(ns.size()));
    CHECK(std::fabs(mean - std::exp(3.0)) < 3.0 * se);
}

TEST_CASE("Markov tree matches the scale-table laws at t = 5", "[simulate][.slow]") {
    const auto m = markov();
    const auto tbl = build_scale_table(m, 5.0, 1e-3);
    TreeSimConfig cfg{.model = m, .horizon = 5.0, .checkpoints = {5.0}};
    const auto samples = batch(cfg, 30000, 12, 2);

    std::vector<std::uint64_t> cond;
    std::vector<double> all;
    for (const auto& s : samples) {
        all.push_back(static_cast<double>(s.alive_at_horizon));
        if (s.alive_at_horizon > 0) cond.push_back(s.alive_at_horizon);
    }
    const double n = static_cast<double>(samples.size());

    // survival probability
    const double p_theo = tbl.survival_prob(5.0);
    const double p_hat = static_cast<double>(cond.size()) / n;
    CHECK(std::fabs(p_hat - p_theo) < 3.0 * std::sqrt(p_theo * (1.0 - p_theo) / n));

    // conditional mean = W(t)
    std::vector<double> condd(cond.begin(), cond.end());
    const double se = std::sqrt(sample_variance(condd) / static_cast<double>(condd.size()));
    CHECK(std::fabs(sample_mean(condd) - tbl.w(5.0)) < 3.0 * se);

    // conditional law is Geometric(1/W)
    const auto c2 = chi_square_geometric(cond, 1.0 / tbl.w(5.0));
    CHECK(c2.p_value > 0.01);

    // unconditional mean = W - W*P_V
    const double se_all = std::sqrt(sample_variance(all) / n);
    CHECK(std::fabs(sample_mean(all) - tbl.mean_nt(5.0)) < 3.0 * se_all);
}

TEST_CASE("contour process hits", "[simulate]") {
    // initial lifetime >= t gives at least one hit
    const LevyModel det5(1.0, LifespanDistribution::deterministic(5.0));
    Rng rng(21);
    for (int i = 0; i < 300; ++i) CHECK(simulate_contour_nt(det5, 3.0, rng) >= 1);
    CHECK_THROWS_AS(simulate_contour_nt(det5, 0.0, rng), ConfigError);
}

TEST_CASE("Yule contour counts are geometric with success 1/W(t)", "[simulate]") {
    const auto m = yule();
    const double t = std::log(2.0);  // W(t) = 2
    Rng rng(22);
    std::vector<std::uint64_t> counts(20000);
    for (auto& c : counts) {
        c = simulate_contour_nt(m, t, rng);
        REQUIRE(c >= 1);
    }
    const auto c2 = chi_square_geometric(counts, 0.5);
    CHECK(c2.p_value > 0.01);
}

TEST_CASE("tree and contour simulators target the same law", "[simulate][.slow]") {
    const auto m = markov();
    const double t = 4.0;
    TreeSimConfig cfg{.model = m, .horizon = t, .checkpoints = {t}};
    const auto samples = batch(cfg, 20000, 31, 2);
    std::vector<double> tree_counts(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        tree_counts[i] = static_cast<double>(samples[i].alive_at_horizon);
    const auto contour = run_replicates<double>(20000, 2, 77, [&m, t] {
        return [&m, t](std::size_t, Rng& rng) {
            return static_cast<double>(simulate_contour_nt(m, t, rng));
        };
    });
    const auto ks = ks_test_two_sample(tree_counts, contour);
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("residual lifetimes: memoryless case is exactly exponential", "[simulate][.slow]") {
    const auto m = markov();
    const double u = 3.0;
    std::vector<double> pooled;
    std::vector<double> o2s, o3s;
    for (int i = 0; i < 6000; ++i) {
        Rng rng = Rng::substream(41, i);
        const auto res = extract_residual_lifetimes(m, u, rng);
        for (std::size_t j = 1; j < res.residuals.size(); ++j) pooled.push_back(res.residuals[j]);
        if (res.residuals.size() >= 3) {
            o2s.push_back(res.residuals[1]);
            o3s.push_back(res.residuals[2]);
        }
    }
    REQUIRE(pooled.size() > 100000);
    const auto ks = ks_test(pooled, [](double x) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-x); });
    CHECK(ks.p_value > 0.01);

    // independence of O_2 and O_3 (given N_u >= 3)
    const double corr = testutil::pearson_corr(o2s, o3s);
    CHECK(std::fabs(corr) < 3.0 / std::sqrt(static_cast<double>(o2s.size())));
}

TEST_CASE("residual lifetimes: Yule residuals are infinite", "[simulate]") {
    Rng rng(43);
    const auto res = extract_residual_lifetimes(yule(), 2.0, rng);
    REQUIRE(res.n_u() >= 1);
    for (double r : res.residuals) CHECK(std::isinf(r));
    CHECK(res.level == 2.0);
}

TEST_CASE("estimate_E properties", "[simulate][.slow]") {
    const auto m = markov();
    const double T = 9.0;
    TreeSimConfig cfg{.model = m, .horizon = T, .checkpoints = {}};
    const auto samples = batch(cfg, 20000, 51, 2);

    bool saw_extinct = false;
    std::vector<double> all, cond;
    for (const auto& s : samples) {
        const double e = estimate_E(s, m);
        all.push_back(e);
        if (s.alive_at_horizon == 0) {
            saw_extinct = true;
            CHECK(e == 0.0);
        } else {
            cond.push_back(e);
        }
    }
    CHECK(saw_extinct);

    // unconditioned mean -> alpha/b = P(NonEx)
    const double se = std::sqrt(sample_variance(all) / static_cast<double>(all.size()));
    CHECK(std::fabs(sample_mean(all) - 0.5) < 3.0 * se);

    // conditioned on survival: Exponential(1)
    const auto ks = ks_test(cond, [](double x) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-x); });
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("root lifespan overrides", "[simulate]") {
    TreeSimConfig cfg{.model = markov(), .horizon = 1.0, .checkpoints = {1.0}};
    cfg.root_lifespan = 0.25;
    TreeSimulator sim(cfg);
    // root dies at 0.25; all later individuals descend from births before then
    for (int i = 0; i < 200; ++i) {
        Rng rng = Rng::substream(61, i);
        const auto& s = sim.run(rng);
        if (s.total_individuals == 1) CHECK(s.alive_at_horizon == 0);
    }
    TreeSimConfig cfg2{.model = markov(), .horizon = 1.0, .checkpoints = {1.0}};
    cfg2.root_lifespan_sampler = [](Rng&) { return 1e9; };
    TreeSimulator sim2(cfg2);
    for (int i = 0; i < 200; ++i) {
        Rng rng = Rng::substream(62, i);
        CHECK(sim2.run(rng).alive_at_horizon >= 1);
    }
}
