#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cmj/rng.hpp"

using namespace cmj;

TEST_CASE("substreams are reproducible and index-dependent", "[rng]") {
    Rng a = Rng::substream(42, 7);
    Rng b = Rng::substream(42, 7);
    Rng c = Rng::substream(42, 8);
    bool identical = true, differs = false;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.next(), y = b.next(), z = c.next();
        identical = identical && (x == y);
        differs = differs || (x != z);
    }
    REQUIRE(identical);
    REQUIRE(differs);
}

TEST_CASE("uniform variates stay in their half-open ranges", "[rng]") {
    Rng rng(1);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        const double v = rng.uniform_pos();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(v > 0.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("exponential sampling has the right mean", "[rng]") {
    Rng rng(2);
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += rng.exponential(2.0);
    const double mean = sum / n;
    REQUIRE(std::fabs(mean - 0.5) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("gaussian sampling has the right first two moments", "[rng]") {
    Rng rng(3);
    const int n = 1000000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.gaussian(1.0, 2.0);
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::fabs(mean - 1.0) < 4.0 * 2.0 / std::sqrt(static_cast<double>(n)));
    REQUIRE(std::fabs(var / 4.0 - 1.0) < 0.01);
}
