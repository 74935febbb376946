#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "multivariance/common.hpp"

namespace multivariance {

namespace detail {

// erf on [0, 2] by the alternating Maclaurin series
//   erf(z) = 2/sqrt(pi) * sum_k (-1)^k z^(2k+1) / (k! (2k+1)).
inline double erf_series(double z) {
    const double z2 = z * z;
    double term = z;  // k = 0 term without the 2/sqrt(pi) factor
    double sum = z;
    for (int k = 1; k < 64; ++k) {
        term *= -z2 / k;
        const double contrib = term / (2 * k + 1);
        sum += contrib;
        if (std::abs(contrib) < 1e-18 * std::abs(sum)) break;
    }
    return (2.0 / std::sqrt(std::numbers::pi)) * sum;
}

// erfc on (2, inf) by the Legendre continued fraction
//   sqrt(pi) e^{z^2} erfc(z) = 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
// evaluated with the modified Lentz algorithm.
inline double erfc_cont_frac(double z) {
    constexpr double tiny = 1e-300;
    double f = z;
    double c = f;
    double d = 0.0;
    for (int n = 1; n < 200; ++n) {
        const double a = 0.5 * n;
        d = z + a * d;
        if (d == 0.0) d = tiny;
        c = z + a / c;
        if (c == 0.0) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::abs(delta - 1.0) < 1e-17) break;
    }
    return std::exp(-z * z) / (std::sqrt(std::numbers::pi) * f);
}

inline double erf_impl(double z) {
    const double a = std::abs(z);
    double r;
    if (a <= 2.0) {
        r = erf_series(a);
    } else {
        r = 1.0 - erfc_cont_frac(a);
    }
    return z < 0 ? -r : r;
}

inline double erfc_impl(double z) {
    if (z > 2.0) return erfc_cont_frac(z);
    return 1.0 - erf_impl(z);
}

}  // namespace detail

// CDF of the chi-squared distribution with one degree of freedom,
// F(x) = erf(sqrt(x/2)).
inline double chi2_1_cdf(double x) {
    if (!(x >= 0.0)) throw usage_error("chi2_1_cdf: x must be >= 0");
    return detail::erf_impl(std::sqrt(0.5 * x));
}

// Survival function 1 - F(x), accurate in the far tail.
inline double chi2_1_survival(double x) {
    if (!(x >= 0.0)) throw usage_error("chi2_1_survival: x must be >= 0");
    return detail::erfc_impl(std::sqrt(0.5 * x));
}

// Inverse of chi2_1_cdf on [0, 1), by safeguarded Newton iteration on a
// bracketing interval. Absolute error below 1e-9.
inline double chi2_1_quantile(double p) {
    if (!(p >= 0.0) || p >= 1.0) throw usage_error("chi2_1_quantile: p must lie in [0, 1)");
    if (p == 0.0) return 0.0;

    const double q = 1.0 - p;  // target survival value
    double lo = 0.0;
    double hi = 1.0;
    while (chi2_1_survival(hi) > q) hi *= 2.0;

    // g(x) = q - survival(x) is increasing with root at the quantile;
    // g'(x) is the chi^2_1 density.
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double g = q - chi2_1_survival(x);
        if (g > 0.0) {
            hi = x;
        } else {
            lo = x;
        }
        const double density = x > 0.0
            ? std::exp(-0.5 * x) / std::sqrt(2.0 * std::numbers::pi * x)
            : std::numeric_limits<double>::infinity();
        double next = x - g / density;
        if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);  // bisection fallback
        if (std::abs(next - x) < 1e-12 * (1.0 + std::abs(x))) {
            x = next;
            break;
        }
        x = next;
    }
    return x;
}

// Holm step-down adjustment. Sorts ascending, multiplies the i-th smallest
// by (k - i), enforces the running maximum, caps at 1; the result is
// returned in input order.
inline std::vector<double> holm_adjust(const std::vector<double>& p) {
    const std::size_t k = p.size();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&p](std::size_t a, std::size_t b) { return p[a] < p[b]; });

    std::vector<double> adjusted(k);
    double running_max = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double scaled = std::min(1.0, static_cast<double>(k - i) * p[order[i]]);
        running_max = std::max(running_max, scaled);
        adjusted[order[i]] = running_max;
    }
    return adjusted;
}

}  // namespace multivariance
