#pragma once

// Shared test utilities: independent oracles (triple-product centering,
// Pearson/RV, subset enumeration over raw multivariances) and small
// statistical checks. Everything here is deliberately written the slow,
// obvious way so it stays independent of the library's computation paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "multivariance/multivariance.hpp"

namespace test_helpers {

namespace mv = multivariance;

inline mv::dataset random_dataset(mv::rng& gen, std::size_t rows,
                                  const std::vector<std::size_t>& dims) {
    std::size_t cols = 0;
    for (std::size_t d : dims) cols += d;
    std::vector<double> values(rows * cols);
    for (auto& v : values) v = gen.normal();
    std::vector<mv::group_info> groups;
    std::size_t col = 0;
    for (std::size_t g = 0; g < dims.size(); ++g) {
        groups.push_back({"X" + std::to_string(g + 1), col, dims[g]});
        col += dims[g];
    }
    return mv::dataset(rows, cols, std::move(values), std::move(groups));
}

// -CBC with C = I - 11^T/N, computed as three explicit matrix products.
inline mv::square_matrix double_center_by_products(const mv::square_matrix& b) {
    const std::size_t n = b.size();
    mv::square_matrix c(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            c(i, j) = (i == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(n);

    auto multiply = [n](const mv::square_matrix& x, const mv::square_matrix& y) {
        mv::square_matrix r(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
                const double xik = x(i, k);
                for (std::size_t j = 0; j < n; ++j) r(i, j) += xik * y(k, j);
            }
        return r;
    };
    mv::square_matrix result = multiply(multiply(c, b), c);
    for (double& v : result.entries()) v = -v;
    return result;
}

inline double max_abs_diff(const mv::square_matrix& a, const mv::square_matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
    return m;
}

inline double pearson_abs(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return std::abs(sxy) / std::sqrt(sxx * syy);
}

// RV coefficient of two column blocks: tr(Sxy Syx) / sqrt(tr(Sxx^2) tr(Syy^2))
// with S the biased cross-covariance matrices.
inline double rv_coefficient(const mv::dataset& data, std::size_t gx, std::size_t gy) {
    const std::size_t n = data.rows();
    const auto& gix = data.group(gx);
    const auto& giy = data.group(gy);

    auto centered = [&](const mv::group_info& gi) {
        std::vector<double> m(n * gi.dim);
        for (std::size_t c = 0; c < gi.dim; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < n; ++r) mean += data.value(r, gi.first_col + c);
            mean /= static_cast<double>(n);
            for (std::size_t r = 0; r < n; ++r)
                m[r * gi.dim + c] = data.value(r, gi.first_col + c) - mean;
        }
        return m;
    };
    const auto xc = centered(gix);
    const auto yc = centered(giy);

    auto cross = [&](const std::vector<double>& a, std::size_t da, const std::vector<double>& b,
                     std::size_t db) {
        std::vector<double> s(da * db, 0.0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t i = 0; i < da; ++i)
                for (std::size_t j = 0; j < db; ++j)
                    s[i * db + j] += a[r * da + i] * b[r * db + j];
        for (double& v : s) v /= static_cast<double>(n);
        return s;
    };
    const auto sxy = cross(xc, gix.dim, yc, giy.dim);
    const auto sxx = cross(xc, gix.dim, xc, gix.dim);
    const auto syy = cross(yc, giy.dim, yc, giy.dim);

    auto frob2 = [](const std::vector<double>& m) {
        double s = 0.0;
        for (double v : m) s += v * v;
        return s;
    };
    return frob2(sxy) / std::sqrt(frob2(sxx) * frob2(syy));
}

// Two-sample Kolmogorov-Smirnov p-value (asymptotic).
inline double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    const double lambda = (ne + 0.12 + 0.11 / ne) * d;
    double p = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        p += sign * 2.0 * std::exp(-2.0 * lambda * lambda * k * k);
        sign = -sign;
    }
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace test_helpers
