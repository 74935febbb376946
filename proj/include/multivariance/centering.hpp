#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "multivariance/common.hpp"
#include "multivariance/dataset.hpp"
#include "multivariance/psi.hpp"

namespace multivariance {

enum class scaling { raw, normalized, r_scaled, mcor_scaled };

// Doubly centered distance matrix of one variable group, possibly rescaled.
// Row and column sums are zero; degenerate means the scaling denominator was
// exactly 0 (constant group) and all entries are 0.
struct centered_matrix {
    square_matrix entries;
    scaling scale = scaling::raw;
    std::size_t tuple_size = 0;  // the n of r_scaled / mcor_scaled denominators
    bool degenerate = false;
    // mcor_scaled with odd n: the n-th moment of the entries was negative and
    // the real signed root was taken.
    bool negative_radicand = false;

    std::size_t size() const noexcept { return entries.size(); }
};

// B_{jk} = psi(x^(j) - x^(k)) on the group's columns. Symmetric, zero diagonal.
inline square_matrix distance_matrix(const dataset& data, std::size_t group,
                                     const psi_spec& psi) {
    psi.validate();
    const std::size_t n = data.rows();
    const std::size_t dim = data.group(group).dim;
    square_matrix b(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double* xj = data.row_group(j, group);
        for (std::size_t k = j + 1; k < n; ++k) {
            const double v = detail::psi_diff(psi, xj, data.row_group(k, group), dim);
            b(j, k) = v;
            b(k, j) = v;
        }
    }
    return b;
}

// A_{jk} = -B_{jk} + rowmean_j + colmean_k - grandmean, the explicit O(N^2)
// form of -CBC. The triple-product form serves as a test oracle.
inline centered_matrix double_center(const square_matrix& b) {
    const std::size_t n = b.size();
    std::vector<double> row_mean(n, 0.0);
    kahan_sum grand;
    for (std::size_t j = 0; j < n; ++j) {
        kahan_sum row;
        for (std::size_t k = 0; k < n; ++k) row.add(b(j, k));
        row_mean[j] = row.value() / static_cast<double>(n);
        grand.add(row.value());
    }
    const double grand_mean = grand.value() / static_cast<double>(n * n);

    centered_matrix out;
    out.entries = square_matrix(n);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t k = 0; k < n; ++k) {
            out.entries(j, k) = -b(j, k) + row_mean[j] + row_mean[k] - grand_mean;
        }
    }
    return out;
}

namespace detail {

inline double grand_mean(const square_matrix& m) {
    kahan_sum sum;
    for (double v : m.entries()) sum.add(v);
    const double n = static_cast<double>(m.size());
    return sum.value() / (n * n);
}

// (N^-2 sum |a|^n)^(1/n) and the signed variant for mcor_scaled.
inline double moment_denominator(const square_matrix& a, std::size_t n, bool absolute,
                                 bool& negative_radicand) {
    kahan_sum sum;
    for (double v : a.entries()) {
        const double base = absolute ? std::abs(v) : v;
        sum.add(std::pow(base, static_cast<double>(n)));
    }
    const double size = static_cast<double>(a.size());
    const double radicand = sum.value() / (size * size);
    negative_radicand = radicand < 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    if (radicand < 0.0) return -std::pow(-radicand, inv_n);
    return std::pow(radicand, inv_n);
}

}  // namespace detail

// Applies one of the scaling variants to a raw centered matrix. A zero
// denominator yields the degenerate zero matrix. mcor_scaled with odd n and a
// negative n-th moment divides by the signed real root and flags it.
inline centered_matrix scale_matrix(const centered_matrix& a, const square_matrix& b,
                                    scaling variant, std::size_t n = 0) {
    if (a.scale != scaling::raw) throw usage_error("scale_matrix: input must be raw");
    if ((variant == scaling::r_scaled || variant == scaling::mcor_scaled) && n < 2)
        throw usage_error("scale_matrix: r_scaled/mcor_scaled require tuple size n >= 2");

    centered_matrix out;
    out.scale = variant;
    out.tuple_size = variant == scaling::normalized ? 0 : n;

    double denom = 0.0;
    bool negative_radicand = false;
    switch (variant) {
        case scaling::raw:
            return a;
        case scaling::normalized:
            denom = detail::grand_mean(b);
            break;
        case scaling::r_scaled:
            denom = detail::moment_denominator(a.entries, n, true, negative_radicand);
            break;
        case scaling::mcor_scaled:
            denom = detail::moment_denominator(a.entries, n, false, negative_radicand);
            negative_radicand = negative_radicand && (n % 2 == 1);
            break;
    }

    const std::size_t size = a.entries.size();
    if (denom == 0.0) {
        out.entries = square_matrix(size, 0.0);
        out.degenerate = true;
        return out;
    }
    out.negative_radicand = negative_radicand;
    out.entries = square_matrix(size);
    const double inv = 1.0 / denom;
    for (std::size_t i = 0; i < size * size; ++i) out.entries.data()[i] = a.entries.data()[i] * inv;
    return out;
}

// Distance + double centering + scaling for one group.
inline centered_matrix centered_matrix_for(const dataset& data, std::size_t group,
                                           const psi_spec& psi, scaling variant,
                                           std::size_t tuple_size = 0) {
    const square_matrix b = distance_matrix(data, group, psi);
    centered_matrix a = double_center(b);
    if (variant == scaling::raw) return a;
    const std::size_t n = tuple_size == 0 ? data.n_groups() : tuple_size;
    return scale_matrix(a, b, variant, n);
}

// All groups at once; matrices are immutable afterwards and may be shared
// across threads.
inline std::vector<centered_matrix> centered_matrices(const dataset& data,
                                                      std::span<const psi_spec> psis,
                                                      scaling variant,
                                                      std::size_t tuple_size = 0) {
    if (psis.size() != data.n_groups())
        throw usage_error("centered_matrices: one psi spec per group required");
    std::vector<centered_matrix> mats;
    mats.reserve(data.n_groups());
    for (std::size_t g = 0; g < data.n_groups(); ++g) {
        mats.push_back(centered_matrix_for(data, g, psis[g], variant, tuple_size));
    }
    return mats;
}

}  // namespace multivariance
