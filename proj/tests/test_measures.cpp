#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"

namespace mv = multivariance;
using test_helpers::pearson_abs;
using test_helpers::random_dataset;
using test_helpers::rv_coefficient;

namespace {

mv::centered_matrix matrix_of(std::vector<std::vector<double>> rows) {
    mv::centered_matrix m;
    m.entries = mv::square_matrix(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows.size(); ++j) m.entries(i, j) = rows[i][j];
    return m;
}

std::vector<mv::centered_matrix> raw_matrices(const mv::dataset& data, const mv::psi_spec& psi) {
    const std::vector<mv::psi_spec> psis(data.n_groups(), psi);
    return mv::centered_matrices(data, psis, mv::scaling::raw);
}

// Sum over all subsets of size >= 2 of lambda^(n-|S|) times the subset
// multivariance; the enumeration oracle behind total multivariance and the
// lambda expansion.
double subset_sum_oracle(const std::vector<mv::centered_matrix>& mats, double lambda) {
    const std::size_t n = mats.size();
    double total = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        std::vector<mv::centered_matrix> sub;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (std::size_t{1} << i)) sub.push_back(mats[i]);
        if (sub.size() < 2) continue;
        total += std::pow(lambda, static_cast<double>(n - sub.size())) *
                 mv::sample_multivariance(sub);
    }
    return total;
}

}  // namespace

TEST_CASE("sample_multivariance examples") {
    const auto a1 = matrix_of({{0.5, -0.5}, {-0.5, 0.5}});
    const auto a2 = matrix_of({{1.0, -1.0}, {-1.0, 1.0}});
    SECTION("two-variable hand sum") {
        const std::vector<mv::centered_matrix> mats{a1, a2};
        CHECK(mv::sample_multivariance(mats) == Catch::Approx(0.5));
    }
    SECTION("odd product over two samples cancels") {
        const auto m1 = matrix_of({{1.0, -1.0}, {-1.0, 1.0}});
        const auto m2 = matrix_of({{2.0, -2.0}, {-2.0, 2.0}});
        const auto m3 = matrix_of({{0.7, -0.7}, {-0.7, 0.7}});
        const std::vector<mv::centered_matrix> mats{m1, m2, m3};
        CHECK(mv::sample_multivariance(mats) == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("degenerate zero matrix nullifies the product") {
        mv::centered_matrix zero;
        zero.entries = mv::square_matrix(2, 0.0);
        zero.degenerate = true;
        const std::vector<mv::centered_matrix> mats{a1, zero};
        CHECK(mv::sample_multivariance(mats) == 0.0);
    }
    SECTION("mismatched sizes are rejected") {
        mv::centered_matrix small;
        small.entries = mv::square_matrix(3, 0.0);
        const std::vector<mv::centered_matrix> mats{a1, small};
        CHECK_THROWS_AS(mv::sample_multivariance(mats), mv::usage_error);
    }
}

TEST_CASE("sample_total_multivariance examples") {
    const auto a1 = matrix_of({{0.5, -0.5}, {-0.5, 0.5}});
    const auto a2 = matrix_of({{1.0, -1.0}, {-1.0, 1.0}});
    const std::vector<mv::centered_matrix> mats{a1, a2};
    SECTION("hand sum, with and without divisor") {
        CHECK(mv::sample_total_multivariance(mats, false) == Catch::Approx(0.5));
        CHECK(mv::sample_total_multivariance(mats, true) == Catch::Approx(0.5));
    }
    SECTION("all-zero matrices give 0") {
        mv::centered_matrix zero;
        zero.entries = mv::square_matrix(3, 0.0);
        const std::vector<mv::centered_matrix> zeros{zero, zero, zero};
        CHECK(mv::sample_total_multivariance(zeros, false) == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("n = 2: total equals multivariance") {
        mv::rng gen(41);
        const auto data = random_dataset(gen, 12, {1, 2});
        const auto raw = raw_matrices(data, mv::psi_spec::euclid(1.0));
        CHECK(mv::sample_total_multivariance(raw, false) ==
              Catch::Approx(mv::sample_multivariance(raw)).margin(1e-12));
    }
}

TEST_CASE("m-multivariance fast equals naive enumeration") {
    mv::rng gen(42);
    SECTION("m = 2 equals multivariance for n = 2") {
        const auto data = random_dataset(gen, 10, {1, 1});
        const auto raw = raw_matrices(data, mv::psi_spec::euclid(1.0));
        CHECK(mv::sample_m_multivariance(raw, 2, mv::m_method::fast) ==
              Catch::Approx(mv::sample_multivariance(raw)).margin(1e-12));
    }
    SECTION("m = 2, n = 3") {
        const auto data = random_dataset(gen, 12, {1, 2, 1});
        const auto raw = raw_matrices(data, mv::psi_spec::euclid(1.0));
        const double fast = mv::sample_m_multivariance(raw, 2, mv::m_method::fast);
        const double naive = mv::sample_m_multivariance(raw, 2, mv::m_method::naive);
        CHECK(fast == Catch::Approx(naive).margin(1e-10));
    }
    SECTION("m = 3, n = 5") {
        const auto data = random_dataset(gen, 11, {1, 1, 2, 1, 3});
        const auto raw = raw_matrices(data, mv::psi_spec::euclid(1.0));
        const double fast = mv::sample_m_multivariance(raw, 3, mv::m_method::fast);
        const double naive = mv::sample_m_multivariance(raw, 3, mv::m_method::naive);
        CHECK(fast == Catch::Approx(naive).margin(1e-10));
    }
    SECTION("contract checks") {
        const auto data = random_dataset(gen, 8, {1, 1, 1});
        const auto raw = raw_matrices(data, mv::psi_spec::euclid(1.0));
        CHECK_THROWS_AS(mv::sample_m_multivariance(raw, 4, mv::m_method::naive), mv::usage_error);
        CHECK_THROWS_AS(mv::sample_m_multivariance(raw, 1, mv::m_method::fast), mv::usage_error);
    }
}

TEST_CASE("total m-multivariance") {
    mv::rng gen(43);
    const auto data = random_dataset(gen, 10, {1, 1, 1, 1});
    const auto raw = raw_matrices(data, mv::psi_spec::euclid(1.0));
    SECTION("m = n recovers total multivariance without divisor") {
        CHECK(mv::sample_total_m_multivariance(raw, 4) ==
              Catch::Approx(mv::sample_total_multivariance(raw, false)).margin(1e-10));
    }
    SECTION("m = 2 equals 2-multivariance") {
        CHECK(mv::sample_total_m_multivariance(raw, 2) ==
              Catch::Approx(mv::sample_m_multivariance(raw, 2, mv::m_method::fast)).margin(1e-12));
    }
    SECTION("all-zero matrices give 0") {
        mv::centered_matrix zero;
        zero.entries = mv::square_matrix(4, 0.0);
        const std::vector<mv::centered_matrix> zeros{zero, zero, zero};
        CHECK(mv::sample_total_m_multivariance(zeros, 3) == Catch::Approx(0.0).margin(1e-15));
    }
}

TEST_CASE("lambda-total multivariance") {
    mv::rng gen(44);
    const auto data = random_dataset(gen, 9, {1, 2, 1});
    const auto raw = raw_matrices(data, mv::psi_spec::euclid(1.0));
    SECTION("lambda = 1 is total multivariance without divisor") {
        CHECK(mv::sample_lambda_total(raw, 1.0) ==
              Catch::Approx(mv::sample_total_multivariance(raw, false)).margin(1e-12));
    }
    SECTION("lambda = 0 is plain multivariance") {
        CHECK(mv::sample_lambda_total(raw, 0.0) ==
              Catch::Approx(mv::sample_multivariance(raw)).margin(1e-12));
    }
    SECTION("subset expansion oracle at lambda = 0.5") {
        CHECK(mv::sample_lambda_total(raw, 0.5) ==
              Catch::Approx(subset_sum_oracle(raw, 0.5)).margin(1e-10));
    }
    SECTION("negative lambda is rejected") {
        CHECK_THROWS_AS(mv::sample_lambda_total(raw, -0.1), mv::usage_error);
    }
}

TEST_CASE("multicorrelation and the Pearson limiting case") {
    mv::rng gen(45);
    SECTION("euclid alpha=2, univariate pair: |Pearson r|") {
        for (int rep = 0; rep < 10; ++rep) {
            const std::size_t n = 8 + gen.uniform_below(20);
            std::vector<double> x(n), y(n);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = gen.normal();
                y[i] = 0.6 * x[i] + gen.normal();
            }
            std::vector<double> values;
            for (std::size_t i = 0; i < n; ++i) {
                values.push_back(x[i]);
                values.push_back(y[i]);
            }
            const mv::dataset data(n, 2, values, {{"x", 0, 1}, {"y", 1, 1}});
            const std::vector<mv::psi_spec> psis(2, mv::psi_spec::euclid(2.0));
            const auto r = mv::multicorrelation(data, psis, mv::scaling::r_scaled);
            CHECK(r.value == Catch::Approx(pearson_abs(x, y)).margin(1e-9));
        }
    }
    SECTION("euclid alpha=2, multivariate pair: RV coefficient") {
        const auto data = random_dataset(gen, 20, {2, 3});
        const std::vector<mv::psi_spec> psis(2, mv::psi_spec::euclid(2.0));
        const auto r = mv::multicorrelation(data, psis, mv::scaling::r_scaled);
        CHECK(r.value * r.value == Catch::Approx(rv_coefficient(data, 0, 1)).margin(1e-9));
    }
    SECTION("even n: both variants coincide") {
        const auto data = random_dataset(gen, 14, {1, 1, 1, 1});
        const std::vector<mv::psi_spec> psis(4, mv::psi_spec::euclid(1.0));
        const auto r = mv::multicorrelation(data, psis, mv::scaling::r_scaled);
        const auto m = mv::multicorrelation(data, psis, mv::scaling::mcor_scaled);
        CHECK(r.value == Catch::Approx(m.value).margin(1e-12));
    }
    SECTION("identical copies, n = 2, mcor_scaled: value 1") {
        std::vector<double> values;
        mv::rng g2(46);
        for (int i = 0; i < 15; ++i) {
            const double v = g2.normal();
            values.push_back(v);
            values.push_back(v);
        }
        const mv::dataset data(15, 2, values, {{"a", 0, 1}, {"b", 1, 1}});
        const std::vector<mv::psi_spec> psis(2, mv::psi_spec::euclid(1.0));
        const auto m = mv::multicorrelation(data, psis, mv::scaling::mcor_scaled);
        CHECK(m.value == Catch::Approx(1.0).margin(1e-9));
    }
    SECTION("degenerate group: value 0 with flag") {
        std::vector<double> values;
        for (int i = 0; i < 6; ++i) {
            values.push_back(1.0);  // constant
            values.push_back(static_cast<double>(i));
        }
        const mv::dataset data(6, 2, values, {{"c", 0, 1}, {"x", 1, 1}});
        const std::vector<mv::psi_spec> psis(2, mv::psi_spec::euclid(1.0));
        const auto r = mv::multicorrelation(data, psis, mv::scaling::r_scaled);
        CHECK(r.value == 0.0);
        CHECK(r.degenerate);
    }
}

TEST_CASE("mcor2") {
    mv::rng gen(47);
    SECTION("n = 2 equals multicorrelation with r scaling") {
        const auto data = random_dataset(gen, 16, {1, 1});
        const std::vector<mv::psi_spec> psis(2, mv::psi_spec::euclid(1.0));
        CHECK(mv::mcor2(data, psis).value ==
              Catch::Approx(mv::multicorrelation(data, psis, mv::scaling::r_scaled).value)
                  .margin(1e-10));
    }
    SECTION("identical copies give 1") {
        std::vector<double> values;
        for (int i = 0; i < 12; ++i) {
            const double v = gen.normal();
            values.insert(values.end(), {v, v, v});
        }
        const mv::dataset data(12, 3, values, {{"a", 0, 1}, {"b", 1, 1}, {"c", 2, 1}});
        const std::vector<mv::psi_spec> psis(3, mv::psi_spec::euclid(1.0));
        CHECK(mv::mcor2(data, psis).value == Catch::Approx(1.0).margin(1e-9));
    }
    SECTION("independent variables, N = 1000: small value") {
        const auto data = random_dataset(gen, 1000, {1, 1, 1});
        const std::vector<mv::psi_spec> psis(3, mv::psi_spec::euclid(1.0));
        CHECK(mv::mcor2(data, psis).value < 0.2);
    }
}

TEST_CASE("total multicorrelation lower bound") {
    mv::rng gen(48);
    SECTION("n = 2 equals the squared multicorrelation") {
        const auto data = random_dataset(gen, 14, {1, 1});
        const std::vector<mv::psi_spec> psis(2, mv::psi_spec::euclid(1.0));
        const double r = mv::multicorrelation(data, psis, mv::scaling::r_scaled).value;
        CHECK(mv::total_mcor_lower_bound(data, psis).value == Catch::Approx(r * r).margin(1e-10));
    }
    SECTION("constant data gives 0") {
        const mv::dataset data(3, 2, {1, 1, 1, 1, 1, 1}, {{"a", 0, 1}, {"b", 1, 1}});
        const std::vector<mv::psi_spec> psis(2, mv::psi_spec::euclid(1.0));
        CHECK(mv::total_mcor_lower_bound(data, psis).value == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("bounded by the naive per-size-scaled subset sum") {
        for (int rep = 0; rep < 5; ++rep) {
            const auto data = random_dataset(gen, 10, {1, 1, 1});
            const std::vector<mv::psi_spec> psis(3, mv::psi_spec::euclid(1.0));
            const double bound = mv::total_mcor_lower_bound(data, psis).value;

            // naive total multicorrelation: subsets scaled with exponent |S|
            double naive = 0.0;
            const std::size_t n = 3;
            for (std::size_t mask = 0; mask < 8; ++mask) {
                std::vector<std::size_t> subset;
                for (std::size_t i = 0; i < n; ++i)
                    if (mask & (std::size_t{1} << i)) subset.push_back(i);
                if (subset.size() < 2) continue;
                std::vector<mv::centered_matrix> sub;
                for (std::size_t i : subset) {
                    const auto b = mv::distance_matrix(data, i, psis[i]);
                    const auto raw = mv::double_center(b);
                    sub.push_back(mv::scale_matrix(raw, b, mv::scaling::r_scaled, subset.size()));
                }
                naive += mv::sample_multivariance(sub);
            }
            naive /= 4.0;  // 2^3 - 3 - 1
            CHECK(bound <= naive + 1e-9);
        }
    }
}

TEST_CASE("measure invariances") {
    mv::rng gen(49);
    SECTION("sample-order permutation leaves every measure unchanged") {
        const auto data = random_dataset(gen, 14, {1, 2, 1});
        const std::vector<mv::psi_spec> psis(3, mv::psi_spec::euclid(1.0));
        const auto raw = mv::centered_matrices(data, psis, mv::scaling::raw);

        const auto perm = mv::random_permutation(gen, data.rows());
        std::vector<double> shuffled(data.rows() * data.cols());
        for (std::size_t r = 0; r < data.rows(); ++r)
            for (std::size_t c = 0; c < data.cols(); ++c)
                shuffled[r * data.cols() + c] = data.value(perm[r], c);
        const mv::dataset permuted(data.rows(), data.cols(), shuffled,
                                   {{"a", 0, 1}, {"b", 1, 2}, {"c", 3, 1}});
        const auto raw_p = mv::centered_matrices(permuted, psis, mv::scaling::raw);

        CHECK(mv::sample_multivariance(raw_p) ==
              Catch::Approx(mv::sample_multivariance(raw)).margin(1e-10));
        CHECK(mv::sample_total_multivariance(raw_p, true) ==
              Catch::Approx(mv::sample_total_multivariance(raw, true)).margin(1e-10));
        CHECK(mv::sample_m_multivariance(raw_p, 2) ==
              Catch::Approx(mv::sample_m_multivariance(raw, 2)).margin(1e-10));
        CHECK(mv::mcor2(permuted, psis).value ==
              Catch::Approx(mv::mcor2(data, psis).value).margin(1e-10));
    }
    SECTION("scale invariance of the scaled measures for euclid") {
        for (double alpha : {0.5, 1.0}) {
            const std::vector<mv::psi_spec> psis(3, mv::psi_spec::euclid(alpha));
            const auto data = random_dataset(gen, 12, {1, 1, 2});
            auto scaled = data;
            const double factors[3] = {2.0, -0.3, 7.5};
            for (std::size_t r = 0; r < data.rows(); ++r) {
                scaled.value(r, 0) *= factors[0];
                scaled.value(r, 1) *= factors[1];
                scaled.value(r, 2) *= factors[2];
                scaled.value(r, 3) *= factors[2];
            }
            const auto norm_a = mv::centered_matrices(data, psis, mv::scaling::normalized);
            const auto norm_b = mv::centered_matrices(scaled, psis, mv::scaling::normalized);
            CHECK(mv::sample_multivariance(norm_b) ==
                  Catch::Approx(mv::sample_multivariance(norm_a)).margin(1e-9));
            CHECK(mv::sample_total_multivariance(norm_b, true) ==
                  Catch::Approx(mv::sample_total_multivariance(norm_a, true)).margin(1e-9));
            CHECK(mv::sample_m_multivariance(norm_b, 2, mv::m_method::fast, true) ==
                  Catch::Approx(mv::sample_m_multivariance(norm_a, 2, mv::m_method::fast, true))
                      .margin(1e-9));
            CHECK(mv::mcor2(scaled, psis).value ==
                  Catch::Approx(mv::mcor2(data, psis).value).margin(1e-9));
            CHECK(mv::multicorrelation(scaled, psis, mv::scaling::r_scaled).value ==
                  Catch::Approx(mv::multicorrelation(data, psis, mv::scaling::r_scaled).value)
                      .margin(1e-9));
        }
    }
    SECTION("total equals the subset sum of multivariances up to n = 5") {
        for (std::size_t n : {std::size_t{3}, std::size_t{4}, std::size_t{5}}) {
            const auto data = random_dataset(gen, 8, std::vector<std::size_t>(n, 1));
            const auto raw = raw_matrices(data, mv::psi_spec::euclid(1.0));
            CHECK(mv::sample_total_multivariance(raw, false) ==
                  Catch::Approx(subset_sum_oracle(raw, 1.0)).margin(1e-10));
        }
    }
}
