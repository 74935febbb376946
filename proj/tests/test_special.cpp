#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "multivariance/rng.hpp"
#include "multivariance/special.hpp"

namespace mv = multivariance;

TEST_CASE("chi2_1_cdf matches erf(sqrt(x/2))") {
    CHECK(mv::chi2_1_cdf(0.0) == 0.0);
    CHECK(mv::chi2_1_cdf(1.0) == Catch::Approx(0.6826895).margin(1e-7));
    CHECK(mv::chi2_1_cdf(3.841459) == Catch::Approx(0.95).margin(1e-6));
    CHECK_THROWS_AS(mv::chi2_1_cdf(-0.1), mv::usage_error);

    // std::erf as an independent oracle across both evaluation branches
    for (double x : {1e-8, 0.01, 0.5, 1.0, 3.0, 7.9, 8.0, 8.1, 12.0, 25.0, 60.0}) {
        CAPTURE(x);
        CHECK(mv::chi2_1_cdf(x) == Catch::Approx(std::erf(std::sqrt(0.5 * x))).margin(1e-12));
    }
}

TEST_CASE("chi2_1_cdf is nondecreasing on a grid") {
    double prev = 0.0;
    for (int i = 0; i <= 10000; ++i) {
        const double x = 0.005 * i;
        const double v = mv::chi2_1_cdf(x);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("chi2_1_quantile") {
    CHECK(mv::chi2_1_quantile(0.0) == 0.0);
    CHECK(mv::chi2_1_quantile(0.95) == Catch::Approx(3.841459).margin(1e-5));
    CHECK_THROWS_AS(mv::chi2_1_quantile(1.0), mv::usage_error);
    CHECK_THROWS_AS(mv::chi2_1_quantile(-0.01), mv::usage_error);

    for (double p : {0.5, 0.9, 0.99}) {
        CAPTURE(p);
        CHECK(mv::chi2_1_cdf(mv::chi2_1_quantile(p)) == Catch::Approx(p).margin(1e-9));
    }
}

TEST_CASE("holm_adjust") {
    SECTION("hand example") {
        const auto adj = mv::holm_adjust({0.01, 0.04, 0.03});
        REQUIRE(adj.size() == 3);
        CHECK(adj[0] == Catch::Approx(0.03));
        CHECK(adj[1] == Catch::Approx(0.06));
        CHECK(adj[2] == Catch::Approx(0.06));
    }
    SECTION("single test is unchanged") {
        const auto adj = mv::holm_adjust({0.2});
        CHECK(adj == std::vector<double>{0.2});
    }
    SECTION("cap and monotonicity") {
        const auto adj = mv::holm_adjust({0.5, 0.9});
        CHECK(adj[0] == Catch::Approx(1.0));
        CHECK(adj[1] == Catch::Approx(1.0));
    }
    SECTION("output dominates input, capped at 1, order-equivariant") {
        mv::rng gen(11);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> p(7);
            for (auto& v : p) v = gen.uniform();
            const auto adj = mv::holm_adjust(p);
            for (std::size_t i = 0; i < p.size(); ++i) {
                CHECK(adj[i] >= p[i]);
                CHECK(adj[i] <= 1.0);
            }
            // permuting the input permutes the output the same way
            std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
            std::vector<double> q(7);
            for (std::size_t i = 0; i < 7; ++i) q[i] = p[perm[i]];
            const auto adj_q = mv::holm_adjust(q);
            for (std::size_t i = 0; i < 7; ++i)
                CHECK(adj_q[i] == Catch::Approx(adj[perm[i]]).margin(1e-15));
        }
    }
}
