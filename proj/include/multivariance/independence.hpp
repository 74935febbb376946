#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "multivariance/centering.hpp"
#include "multivariance/common.hpp"
#include "multivariance/dataset.hpp"
#include "multivariance/measures.hpp"
#include "multivariance/psi.hpp"
#include "multivariance/rng.hpp"
#include "multivariance/special.hpp"

namespace multivariance {

// Which test statistic to form. All statistics are N times the normalized
// sample measure (matrices scaled by their mean distance); total carries the
// 1/(2^n - n - 1) divisor, m-multivariance the 1/C(n,m) divisor, so each has
// limiting expectation 1 under independence.
struct stat_kind {
    enum class type { multi, total, m_multi, lambda_total };

    type t = type::multi;
    std::size_t m = 2;
    double lambda = 1.0;

    static stat_kind multi() { return {type::multi, 0, 0.0}; }
    static stat_kind total() { return {type::total, 0, 0.0}; }
    static stat_kind m_of(std::size_t m) { return {type::m_multi, m, 0.0}; }
    static stat_kind m2() { return m_of(2); }
    static stat_kind m3() { return m_of(3); }
    static stat_kind lambda_total_of(double lambda) { return {type::lambda_total, 0, lambda}; }

    std::string name() const {
        switch (t) {
            case type::multi: return "multi";
            case type::total: return "total";
            case type::m_multi: return "m" + std::to_string(m);
            case type::lambda_total: {
                std::ostringstream out;
                out << "lambda:" << lambda;
                return out.str();
            }
        }
        return {};
    }
};

enum class test_method { conservative, resampling, montecarlo, consistent };

inline std::string to_string(test_method m) {
    switch (m) {
        case test_method::conservative: return "conservative";
        case test_method::resampling: return "resampling";
        case test_method::montecarlo: return "montecarlo";
        case test_method::consistent: return "consistent";
    }
    return {};
}

struct test_outcome {
    stat_kind kind;
    test_method method = test_method::conservative;
    std::size_t replications = 0;  // resampling / Monte Carlo
    double beta = 0.0;             // consistent
    double threshold_constant = 0.0;
    double statistic = 0.0;
    double rejection_level = 0.0;
    std::optional<double> p_value;
    bool reject = false;
    double alpha = 0.0;
    std::vector<std::string> notes;
};

namespace detail {

inline void append_kind_notes(const stat_kind& kind, std::size_t n_groups,
                              std::vector<std::string>& notes) {
    if (kind.t == stat_kind::type::multi) {
        notes.push_back("consistency against all alternatives requires (" +
                        std::to_string(n_groups - 1) + ")-independence");
    } else if (kind.t == stat_kind::type::m_multi && kind.m > 2) {
        notes.push_back("consistency against all alternatives requires (" +
                        std::to_string(kind.m - 1) + ")-independence");
    }
}

inline void append_psi_notes(std::span<const psi_spec> psis, std::vector<std::string>& notes) {
    for (std::size_t i = 0; i < psis.size(); ++i) {
        if (!psis[i].characterizing()) {
            notes.push_back("psi of group " + std::to_string(i + 1) +
                            " is non-characterizing (euclid alpha=2); a zero value does not "
                            "characterize independence");
            break;
        }
    }
}

inline void validate_kind(const stat_kind& kind, std::size_t n_groups) {
    if (n_groups < 2) throw usage_error("test statistic: at least 2 variable groups required");
    if (kind.t == stat_kind::type::m_multi && (kind.m < 2 || kind.m > n_groups))
        throw usage_error("test statistic: m must lie in [2, number of groups]");
    if (kind.t == stat_kind::type::lambda_total && !(kind.lambda >= 0.0))
        throw usage_error("test statistic: lambda must be >= 0");
}

}  // namespace detail

// N x normalized measure for the given kind, clamped at 0. Operates on the
// already normalized matrices of all groups.
inline double statistic_from_matrices(std::span<const centered_matrix> mats,
                                      const stat_kind& kind) {
    detail::validate_kind(kind, mats.size());
    const double N = static_cast<double>(mats.front().size());
    double measure = 0.0;
    switch (kind.t) {
        case stat_kind::type::multi:
            measure = sample_multivariance(mats);
            break;
        case stat_kind::type::total:
            measure = sample_total_multivariance(mats, /*normalized_divisor=*/true);
            break;
        case stat_kind::type::m_multi: {
            const m_method method =
                (kind.m == 2 || kind.m == 3) ? m_method::fast : m_method::naive;
            measure = sample_m_multivariance(mats, kind.m, method, /*normalized_divisor=*/true);
            break;
        }
        case stat_kind::type::lambda_total:
            measure = sample_lambda_total(mats, kind.lambda);
            break;
    }
    return std::max(0.0, N * measure);
}

// Builds the normalized matrices group by group and evaluates the statistic.
// m >= 4 requires all matrices at once and falls back to materializing them.
inline double test_statistic(const dataset& data, std::span<const psi_spec> psis,
                             const stat_kind& kind, std::size_t* degenerate_groups = nullptr) {
    detail::validate_kind(kind, data.n_groups());
    if (psis.size() != data.n_groups())
        throw usage_error("test statistic: one psi spec per group required");

    if (degenerate_groups) *degenerate_groups = 0;
    const std::size_t n_groups = data.n_groups();
    const std::size_t N = data.rows();

    if (kind.t == stat_kind::type::m_multi && kind.m >= 4) {
        const auto mats = centered_matrices(data, psis, scaling::normalized);
        if (degenerate_groups) {
            for (const auto& m : mats)
                if (m.degenerate) ++*degenerate_groups;
        }
        return statistic_from_matrices(mats, kind);
    }

    const bool need_sums = kind.t == stat_kind::type::m_multi;
    const bool need_cubes = need_sums && kind.m == 3;
    std::vector<double> prod;   // running entrywise product (multi / total / lambda)
    std::vector<double> s, s2, s3;
    if (need_sums) {
        s.assign(N * N, 0.0);
        s2.assign(N * N, 0.0);
        if (need_cubes) s3.assign(N * N, 0.0);
    } else {
        prod.assign(N * N, 0.0);
    }

    const double lambda = kind.t == stat_kind::type::lambda_total ? kind.lambda
                          : kind.t == stat_kind::type::total      ? 1.0
                                                                  : 0.0;
    bool first = true;
    for (std::size_t g = 0; g < n_groups; ++g) {
        const centered_matrix mat = centered_matrix_for(data, g, psis[g], scaling::normalized);
        if (mat.degenerate && degenerate_groups) ++*degenerate_groups;
        const double* a = mat.entries.data();
        if (need_sums) {
            for (std::size_t e = 0; e < N * N; ++e) {
                const double v = a[e];
                s[e] += v;
                s2[e] += v * v;
                if (need_cubes) s3[e] += v * v * v;
            }
        } else if (first) {
            for (std::size_t e = 0; e < N * N; ++e) prod[e] = lambda + a[e];
        } else {
            for (std::size_t e = 0; e < N * N; ++e) prod[e] *= lambda + a[e];
        }
        first = false;
    }

    const double n2 = static_cast<double>(N) * static_cast<double>(N);
    kahan_sum sum;
    double measure = 0.0;
    switch (kind.t) {
        case stat_kind::type::multi:
            for (double v : prod) sum.add(v);
            measure = sum.value() / n2;
            break;
        case stat_kind::type::total:
            for (double v : prod) sum.add(v - 1.0);
            measure = sum.value() / n2 / detail::total_divisor(n_groups);
            break;
        case stat_kind::type::lambda_total: {
            const double lambda_pow = std::pow(lambda, static_cast<double>(n_groups));
            for (double v : prod) sum.add(v - lambda_pow);
            measure = sum.value() / n2;
            break;
        }
        case stat_kind::type::m_multi:
            if (kind.m == 2) {
                for (std::size_t e = 0; e < N * N; ++e) sum.add(0.5 * (s[e] * s[e] - s2[e]));
                measure = sum.value() / n2 / detail::binomial(n_groups, 2);
            } else {
                for (std::size_t e = 0; e < N * N; ++e)
                    sum.add((s[e] * s[e] * s[e] - 3.0 * s[e] * s2[e] + 2.0 * s3[e]) / 6.0);
                measure = sum.value() / n2 / detail::binomial(n_groups, 3);
            }
            break;
    }
    return std::max(0.0, static_cast<double>(N) * measure);
}

// Evaluates several statistics in one pass over the data. Each group's
// distance matrix is built once; the doubly centered, normalized entries are
// formed on the fly and folded into the accumulators of every requested kind,
// so the cost is O(n N^2) regardless of how many kinds are asked for.
// Only multi, total, lambda and m in {2, 3} take this path.
inline std::vector<double> test_statistics_bundle(const dataset& data,
                                                  std::span<const psi_spec> psis,
                                                  std::span<const stat_kind> kinds) {
    if (psis.size() != data.n_groups())
        throw usage_error("test statistic: one psi spec per group required");
    bool need_sum = false, need_cube = false, need_prod = false, need_prod1p = false;
    std::vector<double> lambdas;
    for (const auto& kind : kinds) {
        detail::validate_kind(kind, data.n_groups());
        switch (kind.t) {
            case stat_kind::type::multi: need_prod = true; break;
            case stat_kind::type::total: need_prod1p = true; break;
            case stat_kind::type::lambda_total: lambdas.push_back(kind.lambda); break;
            case stat_kind::type::m_multi:
                if (kind.m >= 4)
                    throw usage_error("test_statistics_bundle: m >= 4 is not supported");
                need_sum = true;
                if (kind.m == 3) need_cube = true;
                break;
        }
    }

    const std::size_t n_groups = data.n_groups();
    const std::size_t N = data.rows();
    const std::size_t total = N * N;
    std::vector<double> b(total);
    std::vector<double> row_mean(N);
    std::vector<double> s, s2, s3, prod, prod1p;
    std::vector<std::vector<double>> prod_lambda(lambdas.size());
    if (need_sum) {
        s.assign(total, 0.0);
        s2.assign(total, 0.0);
        if (need_cube) s3.assign(total, 0.0);
    }
    if (need_prod) prod.assign(total, 1.0);
    if (need_prod1p) prod1p.assign(total, 1.0);
    for (auto& pl : prod_lambda) pl.assign(total, 1.0);

    for (std::size_t g = 0; g < n_groups; ++g) {
        psis[g].validate();
        const std::size_t dim = data.group(g).dim;
        for (std::size_t j = 0; j < N; ++j) {
            const double* xj = data.row_group(j, g);
            b[j * N + j] = 0.0;
            for (std::size_t k = j + 1; k < N; ++k) {
                const double v = multivariance::detail::psi_diff(psis[g], xj,
                                                                 data.row_group(k, g), dim);
                b[j * N + k] = v;
                b[k * N + j] = v;
            }
        }
        kahan_sum grand;
        for (std::size_t j = 0; j < N; ++j) {
            kahan_sum row;
            for (std::size_t k = 0; k < N; ++k) row.add(b[j * N + k]);
            row_mean[j] = row.value() / static_cast<double>(N);
            grand.add(row.value());
        }
        const double grand_mean = grand.value() / static_cast<double>(total);
        const double inv = grand_mean > 0.0 ? 1.0 / grand_mean : 0.0;

        for (std::size_t j = 0; j < N; ++j) {
            const double rj = row_mean[j];
            for (std::size_t k = 0; k < N; ++k) {
                const std::size_t e = j * N + k;
                const double a = (-b[e] + rj + row_mean[k] - grand_mean) * inv;
                if (need_sum) {
                    s[e] += a;
                    s2[e] += a * a;
                    if (need_cube) s3[e] += a * a * a;
                }
                if (need_prod) prod[e] *= a;
                if (need_prod1p) prod1p[e] *= 1.0 + a;
                for (std::size_t t = 0; t < lambdas.size(); ++t)
                    prod_lambda[t][e] *= lambdas[t] + a;
            }
        }
    }

    const double n2 = static_cast<double>(total);
    std::vector<double> out(kinds.size());
    std::size_t lambda_index = 0;
    for (std::size_t q = 0; q < kinds.size(); ++q) {
        const auto& kind = kinds[q];
        kahan_sum sum;
        double measure = 0.0;
        switch (kind.t) {
            case stat_kind::type::multi:
                for (double v : prod) sum.add(v);
                measure = sum.value() / n2;
                break;
            case stat_kind::type::total:
                for (double v : prod1p) sum.add(v - 1.0);
                measure = sum.value() / n2 / detail::total_divisor(n_groups);
                break;
            case stat_kind::type::lambda_total: {
                const double lp = std::pow(kind.lambda, static_cast<double>(n_groups));
                for (double v : prod_lambda[lambda_index]) sum.add(v - lp);
                ++lambda_index;
                measure = sum.value() / n2;
                break;
            }
            case stat_kind::type::m_multi:
                if (kind.m == 2) {
                    for (std::size_t e = 0; e < total; ++e) sum.add(0.5 * (s[e] * s[e] - s2[e]));
                    measure = sum.value() / n2 / detail::binomial(n_groups, 2);
                } else {
                    for (std::size_t e = 0; e < total; ++e)
                        sum.add((s[e] * s[e] * s[e] - 3.0 * s[e] * s2[e] + 2.0 * s3[e]) / 6.0);
                    measure = sum.value() / n2 / detail::binomial(n_groups, 3);
                }
                break;
        }
        out[q] = std::max(0.0, static_cast<double>(N) * measure);
    }
    return out;
}

namespace detail {

// Replicate statistics for one draw of per-group permutations, evaluated
// directly on the cached matrices: a permutation of the samples of group i is
// the simultaneous row/column permutation of A_i.
inline void permuted_statistics(std::span<const centered_matrix> mats,
                                std::span<const std::vector<std::uint32_t>> perms,
                                std::span<const stat_kind> kinds, std::span<double> out) {
    const std::size_t n_groups = mats.size();
    const std::size_t N = mats.front().size();

    bool need_sum = false, need_sq = false, need_cube = false, need_prod = false,
         need_prod1p = false;
    std::vector<double> lambdas;
    bool fallback = false;
    for (const auto& kind : kinds) {
        switch (kind.t) {
            case stat_kind::type::multi: need_prod = true; break;
            case stat_kind::type::total: need_prod1p = true; break;
            case stat_kind::type::lambda_total: lambdas.push_back(kind.lambda); break;
            case stat_kind::type::m_multi:
                if (kind.m >= 4) {
                    fallback = true;
                } else {
                    need_sum = need_sq = true;
                    if (kind.m == 3) need_cube = true;
                }
                break;
        }
    }

    if (fallback) {
        // m >= 4 has no power-sum shortcut: materialize the permuted matrices.
        std::vector<centered_matrix> permuted(n_groups);
        for (std::size_t i = 0; i < n_groups; ++i) {
            permuted[i].scale = mats[i].scale;
            permuted[i].degenerate = mats[i].degenerate;
            permuted[i].entries = square_matrix(N);
            const double* src = mats[i].entries.data();
            const auto& p = perms[i];
            for (std::size_t j = 0; j < N; ++j) {
                const std::size_t base = static_cast<std::size_t>(p[j]) * N;
                for (std::size_t k = 0; k < N; ++k) {
                    permuted[i].entries(j, k) = src[base + p[k]];
                }
            }
        }
        for (std::size_t q = 0; q < kinds.size(); ++q) {
            out[q] = statistic_from_matrices(permuted, kinds[q]);
        }
        return;
    }

    std::vector<kahan_sum> acc_lambda(lambdas.size());
    std::vector<double> lambda_pow(lambdas.size());
    for (std::size_t t = 0; t < lambdas.size(); ++t)
        lambda_pow[t] = std::pow(lambdas[t], static_cast<double>(n_groups));
    kahan_sum acc_sum2, acc_sum3, acc_prod, acc_prod1p;

    std::vector<const double*> base(n_groups);
    std::vector<double> vals(n_groups);
    for (std::size_t j = 0; j < N; ++j) {
        for (std::size_t i = 0; i < n_groups; ++i) {
            base[i] = mats[i].entries.data() + static_cast<std::size_t>(perms[i][j]) * N;
        }
        for (std::size_t k = 0; k < N; ++k) {
            for (std::size_t i = 0; i < n_groups; ++i) vals[i] = base[i][perms[i][k]];

            if (need_sum) {
                double sv = 0.0, sq = 0.0, cu = 0.0;
                for (double a : vals) {
                    sv += a;
                    sq += a * a;
                    if (need_cube) cu += a * a * a;
                }
                if (need_sq) acc_sum2.add(0.5 * (sv * sv - sq));
                if (need_cube) acc_sum3.add((sv * sv * sv - 3.0 * sv * sq + 2.0 * cu) / 6.0);
            }
            if (need_prod) {
                double p = vals[0];
                for (std::size_t i = 1; i < n_groups; ++i) p *= vals[i];
                acc_prod.add(p);
            }
            if (need_prod1p) {
                double p = 1.0 + vals[0];
                for (std::size_t i = 1; i < n_groups; ++i) p *= 1.0 + vals[i];
                acc_prod1p.add(p - 1.0);
            }
            for (std::size_t t = 0; t < lambdas.size(); ++t) {
                double p = lambdas[t] + vals[0];
                for (std::size_t i = 1; i < n_groups; ++i) p *= lambdas[t] + vals[i];
                acc_lambda[t].add(p - lambda_pow[t]);
            }
        }
    }

    const double n2 = static_cast<double>(N) * static_cast<double>(N);
    std::size_t lambda_index = 0;
    for (std::size_t q = 0; q < kinds.size(); ++q) {
        const auto& kind = kinds[q];
        double measure = 0.0;
        switch (kind.t) {
            case stat_kind::type::multi: measure = acc_prod.value() / n2; break;
            case stat_kind::type::total:
                measure = acc_prod1p.value() / n2 / total_divisor(n_groups);
                break;
            case stat_kind::type::m_multi:
                measure = (kind.m == 2 ? acc_sum2.value() : acc_sum3.value()) / n2 /
                          binomial(n_groups, kind.m);
                break;
            case stat_kind::type::lambda_total:
                measure = acc_lambda[lambda_index++].value() / n2;
                break;
        }
        out[q] = std::max(0.0, static_cast<double>(N) * measure);
    }
}

// Largest replicate count c such that (1 + c)/(L + 1) <= alpha, or -1. The
// rejection level below is derived from the same integer so the p-value and
// threshold decisions always agree.
inline long long max_exceedances_for_rejection(std::size_t L, double alpha) {
    long long c = static_cast<long long>(std::floor(alpha * static_cast<double>(L + 1))) - 1;
    c = std::min<long long>(c, static_cast<long long>(L));
    while (c + 1 <= static_cast<long long>(L) &&
           (static_cast<double>(c) + 2.0) / static_cast<double>(L + 1) <= alpha)
        ++c;
    while (c >= 0 && (static_cast<double>(c) + 1.0) / static_cast<double>(L + 1) > alpha) --c;
    return c;
}

struct empirical_decision {
    double rejection_level;
    double p_value;
    bool reject;
};

// p = (1 + #{replicates >= observed}) / (L + 1); rejection level is the
// ceil((1-alpha)(L+1))-th order statistic (+inf when that exceeds L).
inline empirical_decision decide_from_replicates(std::vector<double> replicates, double observed,
                                                 double alpha) {
    const std::size_t L = replicates.size();
    std::size_t exceed = 0;
    for (double r : replicates) {
        if (r >= observed) ++exceed;
    }
    const double p = (1.0 + static_cast<double>(exceed)) / static_cast<double>(L + 1);

    const long long cstar = max_exceedances_for_rejection(L, alpha);
    double level;
    if (cstar < 0) {
        level = std::numeric_limits<double>::infinity();
    } else if (cstar >= static_cast<long long>(L)) {
        level = -std::numeric_limits<double>::infinity();
    } else {
        const std::size_t k = L - static_cast<std::size_t>(cstar);  // = ceil((1-alpha)(L+1))
        std::nth_element(replicates.begin(), replicates.begin() + (k - 1), replicates.end());
        level = replicates[k - 1];
    }
    return {level, p, static_cast<long long>(exceed) <= cstar};
}

}  // namespace detail

// Null-distribution replicates: for each of the L draws every group receives
// an independent random permutation (a group can be exempted through
// permute_group, which is useful for exchangeability diagnostics). Replicate
// l uses the derived generator rng(base + l), so results do not depend on the
// worker count.
inline std::vector<double> resampling_replicates(
    std::span<const centered_matrix> mats, const stat_kind& kind, std::size_t L, rng& gen,
    const std::vector<bool>& permute_group = {}, std::size_t workers = 1) {
    const std::size_t n_groups = mats.size();
    const std::size_t N = mats.front().size();
    if (!permute_group.empty() && permute_group.size() != n_groups)
        throw usage_error("resampling_replicates: permute mask size mismatch");

    std::vector<std::uint32_t> identity(N);
    for (std::size_t i = 0; i < N; ++i) identity[i] = static_cast<std::uint32_t>(i);

    const std::uint64_t base = gen.next_u64();
    std::vector<double> replicates(L);
    const stat_kind kinds[1] = {kind};
    parallel_for(L, workers, [&](std::size_t l) {
        rng sub(base + l);
        std::vector<std::vector<std::uint32_t>> perms(n_groups);
        for (std::size_t i = 0; i < n_groups; ++i) {
            const bool permute = permute_group.empty() || permute_group[i];
            perms[i] = permute ? random_permutation(sub, N) : identity;
        }
        double out[1];
        detail::permuted_statistics(mats, perms, kinds, out);
        replicates[l] = out[0];
    });
    return replicates;
}

// Distribution-free conservative test: rejection level F^-1_{chi^2_1}(1-alpha),
// valid for alpha <= 0.215. The p-value is an upper bound.
inline test_outcome conservative_test(double statistic, double alpha,
                                      stat_kind kind = stat_kind::multi()) {
    if (!(alpha > 0.0) || alpha > 0.215)
        throw usage_error(
            "conservative test: alpha must lie in (0, 0.215] (the distribution-free rejection "
            "level is only valid on this range)");
    test_outcome out;
    out.kind = kind;
    out.method = test_method::conservative;
    out.alpha = alpha;
    out.statistic = statistic;
    out.rejection_level = chi2_1_quantile(1.0 - alpha);
    out.p_value = std::min(1.0, chi2_1_survival(std::max(0.0, statistic)));
    out.reject = *out.p_value <= alpha;
    out.notes.push_back("conservative bound");
    return out;
}

inline test_outcome resampling_test(const dataset& data, std::span<const psi_spec> psis,
                                    const stat_kind& kind, std::size_t L, double alpha, rng& gen,
                                    std::size_t workers = 1) {
    if (L < 1) throw usage_error("resampling test: L must be >= 1");
    const auto mats = centered_matrices(data, psis, scaling::normalized);
    test_outcome out;
    out.kind = kind;
    out.method = test_method::resampling;
    out.replications = L;
    out.alpha = alpha;
    out.statistic = statistic_from_matrices(mats, kind);

    auto replicates = resampling_replicates(mats, kind, L, gen, {}, workers);
    const auto decision = detail::decide_from_replicates(std::move(replicates), out.statistic, alpha);
    out.rejection_level = decision.rejection_level;
    out.p_value = decision.p_value;
    out.reject = decision.reject;

    std::size_t degenerate = 0;
    for (const auto& m : mats)
        if (m.degenerate) ++degenerate;
    if (degenerate == mats.size()) out.notes.push_back("all groups are constant; statistic is 0");
    detail::append_kind_notes(kind, data.n_groups(), out.notes);
    detail::append_psi_notes(psis, out.notes);
    return out;
}

// Samples each marginal independently: a fresh dataset of N rows whose groups
// follow the true marginal distributions.
using marginal_sampler = std::function<dataset(std::size_t, rng&)>;

inline test_outcome monte_carlo_test(const marginal_sampler& generator, const dataset& data,
                                     std::span<const psi_spec> psis, const stat_kind& kind,
                                     std::size_t L, double alpha, rng& gen,
                                     std::size_t workers = 1) {
    if (L < 1) throw usage_error("Monte Carlo test: L must be >= 1");
    test_outcome out;
    out.kind = kind;
    out.method = test_method::montecarlo;
    out.replications = L;
    out.alpha = alpha;
    out.statistic = test_statistic(data, psis, kind);

    const std::uint64_t base = gen.next_u64();
    std::vector<double> replicates(L);
    std::vector<psi_spec> psis_copy(psis.begin(), psis.end());
    parallel_for(L, workers, [&](std::size_t l) {
        rng sub(base + l);
        const dataset fresh = generator(data.rows(), sub);
        if (fresh.n_groups() != data.n_groups())
            throw usage_error("Monte Carlo test: generator group count mismatch");
        for (std::size_t g = 0; g < fresh.n_groups(); ++g) {
            if (fresh.group(g).dim != data.group(g).dim)
                throw usage_error("Monte Carlo test: generator dimension mismatch");
        }
        replicates[l] = test_statistic(fresh, psis_copy, kind);
    });

    const auto decision = detail::decide_from_replicates(std::move(replicates), out.statistic, alpha);
    out.rejection_level = decision.rejection_level;
    out.p_value = decision.p_value;
    out.reject = decision.reject;
    detail::append_kind_notes(kind, data.n_groups(), out.notes);
    detail::append_psi_notes(psis, out.notes);
    return out;
}

// Consistent-threshold test: rejection level N^(1-beta) * C. No p-value; the
// note carries the approximate single-test type-I probability.
inline test_outcome consistent_test(double statistic, std::size_t N, double beta, double C,
                                    stat_kind kind = stat_kind::multi()) {
    if (!(beta > 0.0) || !(beta < 1.0))
        throw usage_error("consistent test: beta must lie in (0, 1)");
    if (!(C > 0.0)) throw usage_error("consistent test: C must be > 0");
    test_outcome out;
    out.kind = kind;
    out.method = test_method::consistent;
    out.beta = beta;
    out.threshold_constant = C;
    out.statistic = statistic;
    out.rejection_level = std::pow(static_cast<double>(N), 1.0 - beta) * C;
    out.reject = statistic > out.rejection_level;
    std::ostringstream note;
    note << "approximate type-I probability of this single test: "
         << chi2_1_survival(out.rejection_level);
    out.notes.push_back(note.str());
    return out;
}

struct combined_result {
    std::vector<test_outcome> components;
    std::vector<double> adjusted_p;
    bool reject = false;
    double alpha = 0.0;
};

// Holm combination of the m2, m3 and (for n > 3) total statistics; rejects
// when any adjusted p-value is significant. method must be conservative or
// resampling.
inline combined_result combined_test(const dataset& data, std::span<const psi_spec> psis,
                                     double alpha, test_method method, std::size_t L = 300,
                                     rng* gen = nullptr, std::size_t workers = 1) {
    if (data.n_groups() < 3) throw usage_error("combined test: at least 3 variable groups required");
    if (method != test_method::conservative && method != test_method::resampling)
        throw usage_error("combined test: method must be conservative or resampling");

    std::vector<stat_kind> kinds = {stat_kind::m2(), stat_kind::m3()};
    if (data.n_groups() > 3) kinds.push_back(stat_kind::total());

    combined_result result;
    result.alpha = alpha;

    const auto mats = centered_matrices(data, psis, scaling::normalized);
    std::vector<double> observed(kinds.size());
    for (std::size_t q = 0; q < kinds.size(); ++q)
        observed[q] = statistic_from_matrices(mats, kinds[q]);

    std::vector<double> raw_p(kinds.size());
    if (method == test_method::conservative) {
        for (std::size_t q = 0; q < kinds.size(); ++q) {
            test_outcome out = conservative_test(observed[q], alpha, kinds[q]);
            raw_p[q] = *out.p_value;
            result.components.push_back(std::move(out));
        }
    } else {
        if (gen == nullptr) throw usage_error("combined test: resampling requires a generator");
        // One shared set of permutation replicates evaluates every kind.
        const std::size_t n_groups = mats.size();
        const std::size_t N = mats.front().size();
        const std::uint64_t base = gen->next_u64();
        std::vector<std::vector<double>> replicates(kinds.size(), std::vector<double>(L));
        parallel_for(L, workers, [&](std::size_t l) {
            rng sub(base + l);
            std::vector<std::vector<std::uint32_t>> perms(n_groups);
            for (auto& p : perms) p = random_permutation(sub, N);
            std::vector<double> vals(kinds.size());
            detail::permuted_statistics(mats, perms, kinds, vals);
            for (std::size_t q = 0; q < kinds.size(); ++q) replicates[q][l] = vals[q];
        });
        for (std::size_t q = 0; q < kinds.size(); ++q) {
            const auto decision =
                detail::decide_from_replicates(std::move(replicates[q]), observed[q], alpha);
            test_outcome out;
            out.kind = kinds[q];
            out.method = test_method::resampling;
            out.replications = L;
            out.alpha = alpha;
            out.statistic = observed[q];
            out.rejection_level = decision.rejection_level;
            out.p_value = decision.p_value;
            out.reject = decision.reject;
            raw_p[q] = decision.p_value;
            result.components.push_back(std::move(out));
        }
    }

    result.adjusted_p = holm_adjust(raw_p);
    for (std::size_t q = 0; q < kinds.size(); ++q) {
        auto& out = result.components[q];
        std::ostringstream note;
        note << "holm-adjusted p-value: " << result.adjusted_p[q];
        out.notes.push_back(note.str());
        out.reject = result.adjusted_p[q] <= alpha;
        if (out.reject) result.reject = true;
    }
    return result;
}

}  // namespace multivariance
