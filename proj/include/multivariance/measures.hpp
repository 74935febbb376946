#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "multivariance/centering.hpp"
#include "multivariance/common.hpp"
#include "multivariance/dataset.hpp"
#include "multivariance/psi.hpp"

namespace multivariance {

enum class m_method { fast, naive };

namespace detail {

inline void check_matrix_set(std::span<const centered_matrix> mats, std::size_t min_count) {
    if (mats.size() < min_count) throw usage_error("measure: at least 2 matrices required");
    const std::size_t n = mats.front().size();
    for (const auto& m : mats) {
        if (m.size() != n) throw usage_error("measure: matrices have mismatched sample counts");
    }
}

inline double binomial(std::size_t n, std::size_t m) {
    if (m > n) return 0.0;
    double r = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        r *= static_cast<double>(n - i);
        r /= static_cast<double>(i + 1);
    }
    return r;
}

// 2^n - n - 1, the number of variable subsets of size >= 2.
inline double total_divisor(std::size_t n) {
    return std::ldexp(1.0, static_cast<int>(n)) - static_cast<double>(n) - 1.0;
}

// Calls fn(subset) for every m-subset of 0..n-1 in lexicographic order.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t m, Fn&& fn) {
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    while (true) {
        fn(std::span<const std::size_t>(idx));
        std::size_t i = m;
        while (i > 0) {
            --i;
            if (idx[i] != i + n - m) break;
            if (i == 0) return;
        }
        ++idx[i];
        for (std::size_t j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
    }
}

inline std::vector<const double*> entry_pointers(std::span<const centered_matrix> mats) {
    std::vector<const double*> ptr(mats.size());
    for (std::size_t i = 0; i < mats.size(); ++i) ptr[i] = mats[i].entries.data();
    return ptr;
}

// N^-2 sum_e prod_i ptr[i][e] over n*n entries.
inline double product_mean(std::span<const double* const> ptr, std::size_t n) {
    kahan_sum sum;
    for (std::size_t e = 0; e < n * n; ++e) {
        double prod = ptr[0][e];
        for (std::size_t i = 1; i < ptr.size(); ++i) prod *= ptr[i][e];
        sum.add(prod);
    }
    return sum.value() / (static_cast<double>(n) * static_cast<double>(n));
}

}  // namespace detail

// N^-2 sum_{j,k} prod_i (A_i)_{jk}. The running product per entry goes over
// the matrices in order; the entry sum is compensated.
inline double sample_multivariance(std::span<const centered_matrix> mats) {
    detail::check_matrix_set(mats, 2);
    const auto ptr = detail::entry_pointers(mats);
    return detail::product_mean(ptr, mats.front().size());
}

// [N^-2 sum_{j,k} prod_i (1 + (A_i)_{jk})] - 1, divided by 2^n - n - 1 when
// normalized_divisor is set.
inline double sample_total_multivariance(std::span<const centered_matrix> mats,
                                         bool normalized_divisor = false) {
    detail::check_matrix_set(mats, 2);
    const std::size_t n = mats.front().size();
    const auto ptr = detail::entry_pointers(mats);
    kahan_sum sum;
    for (std::size_t e = 0; e < n * n; ++e) {
        double prod = 1.0 + ptr[0][e];
        for (std::size_t i = 1; i < ptr.size(); ++i) prod *= 1.0 + ptr[i][e];
        sum.add(prod - 1.0);
    }
    double value = sum.value() / (static_cast<double>(n) * static_cast<double>(n));
    if (normalized_divisor) value /= detail::total_divisor(mats.size());
    return value;
}

// Sum over all m-subsets of the subset multivariances. The fast route uses
// the multinomial identities on entrywise power sums and is available for
// m in {2, 3}; naive enumerates the subsets and serves as the oracle.
inline double sample_m_multivariance(std::span<const centered_matrix> mats, std::size_t m,
                                     m_method method = m_method::fast,
                                     bool normalized_divisor = false) {
    detail::check_matrix_set(mats, 2);
    const std::size_t n_vars = mats.size();
    if (m < 2 || m > n_vars)
        throw usage_error("m-multivariance: m must lie in [2, number of variables]");

    double value = 0.0;
    if (method == m_method::fast) {
        if (m != 2 && m != 3)
            throw usage_error("m-multivariance: fast evaluation covers m = 2 and m = 3 only");
        const std::size_t n = mats.front().size();
        const auto ptr = detail::entry_pointers(mats);
        kahan_sum sum;
        if (m == 2) {
            for (std::size_t e = 0; e < n * n; ++e) {
                double s = 0.0, s2 = 0.0;
                for (const double* p : ptr) {
                    const double a = p[e];
                    s += a;
                    s2 += a * a;
                }
                sum.add(0.5 * (s * s - s2));
            }
        } else {
            for (std::size_t e = 0; e < n * n; ++e) {
                double s = 0.0, s2 = 0.0, s3 = 0.0;
                for (const double* p : ptr) {
                    const double a = p[e];
                    s += a;
                    s2 += a * a;
                    s3 += a * a * a;
                }
                sum.add((s * s * s - 3.0 * s * s2 + 2.0 * s3) / 6.0);
            }
        }
        value = sum.value() / (static_cast<double>(n) * static_cast<double>(n));
    } else {
        kahan_sum sum;
        const std::size_t n = mats.front().size();
        std::vector<const double*> sub(m);
        detail::for_each_subset(n_vars, m, [&](std::span<const std::size_t> subset) {
            for (std::size_t i = 0; i < m; ++i) sub[i] = mats[subset[i]].entries.data();
            sum.add(detail::product_mean(sub, n));
        });
        value = sum.value();
    }
    if (normalized_divisor) value /= detail::binomial(n_vars, m);
    return value;
}

// sum_{l=2..m} of the l-multivariances (no divisors); equals total
// multivariance without divisor when m = n.
inline double sample_total_m_multivariance(std::span<const centered_matrix> mats, std::size_t m) {
    detail::check_matrix_set(mats, 2);
    if (m < 2 || m > mats.size())
        throw usage_error("total m-multivariance: m must lie in [2, number of variables]");
    kahan_sum sum;
    for (std::size_t l = 2; l <= m; ++l) {
        const m_method method = (l == 2 || l == 3) ? m_method::fast : m_method::naive;
        sum.add(sample_m_multivariance(mats, l, method, false));
    }
    return sum.value();
}

// [N^-2 sum_{j,k} prod_i (lambda + (A_i)_{jk})] - lambda^n. lambda = 1 gives
// total multivariance (no divisor), lambda = 0 plain multivariance.
inline double sample_lambda_total(std::span<const centered_matrix> mats, double lambda) {
    detail::check_matrix_set(mats, 2);
    if (!(lambda >= 0.0)) throw usage_error("lambda-total: lambda must be >= 0");
    const std::size_t n = mats.front().size();
    const auto ptr = detail::entry_pointers(mats);
    const double lambda_pow = std::pow(lambda, static_cast<double>(mats.size()));
    kahan_sum sum;
    for (std::size_t e = 0; e < n * n; ++e) {
        double prod = lambda + ptr[0][e];
        for (std::size_t i = 1; i < ptr.size(); ++i) prod *= lambda + ptr[i][e];
        sum.add(prod - lambda_pow);
    }
    return sum.value() / (static_cast<double>(n) * static_cast<double>(n));
}

// Scale-invariant correlation-type measures. `degenerate` reports a constant
// group; `negative_radicand` the signed root taken for odd-n Mcor scaling.
struct correlation_value {
    double value = 0.0;
    bool degenerate = false;
    bool negative_radicand = false;
};

// Multicorrelation of all n groups: multivariance of r_scaled (variant
// scaling::r_scaled) or mcor_scaled matrices, clamped at 0 before the root.
inline correlation_value multicorrelation(const dataset& data, std::span<const psi_spec> psis,
                                          scaling variant) {
    if (variant != scaling::r_scaled && variant != scaling::mcor_scaled)
        throw usage_error("multicorrelation: variant must be r_scaled or mcor_scaled");
    if (data.n_groups() < 2) throw usage_error("multicorrelation: at least 2 groups required");
    const auto mats = centered_matrices(data, psis, variant, data.n_groups());
    correlation_value out;
    for (const auto& m : mats) {
        out.degenerate = out.degenerate || m.degenerate;
        out.negative_radicand = out.negative_radicand || m.negative_radicand;
    }
    out.value = std::sqrt(std::max(0.0, sample_multivariance(mats)));
    return out;
}

// 2-multicorrelation: root of the pair-averaged 2-multivariance of matrices
// scaled by their quadratic-moment denominators.
inline correlation_value mcor2(const dataset& data, std::span<const psi_spec> psis) {
    if (data.n_groups() < 2) throw usage_error("mcor2: at least 2 groups required");
    const auto mats = centered_matrices(data, psis, scaling::r_scaled, 2);
    correlation_value out;
    for (const auto& m : mats) out.degenerate = out.degenerate || m.degenerate;
    const double mean_pairs =
        sample_m_multivariance(mats, 2, m_method::fast, /*normalized_divisor=*/true);
    out.value = std::sqrt(std::max(0.0, mean_pairs));
    return out;
}

// Efficient sample version of the lower bound for total multicorrelation:
// [N^-2 sum prod(1 + (B_i)_{jk}) - 1] / (2^n - n - 1) with B_i the r_scaled
// matrices of exponent n.
inline correlation_value total_mcor_lower_bound(const dataset& data,
                                                std::span<const psi_spec> psis) {
    if (data.n_groups() < 2)
        throw usage_error("total_mcor_lower_bound: at least 2 groups required");
    const auto mats = centered_matrices(data, psis, scaling::r_scaled, data.n_groups());
    correlation_value out;
    for (const auto& m : mats) out.degenerate = out.degenerate || m.degenerate;
    out.value = sample_total_multivariance(mats, /*normalized_divisor=*/true);
    return out;
}

}  // namespace multivariance
