#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "multivariance/centering.hpp"
#include "multivariance/common.hpp"
#include "multivariance/dataset.hpp"
#include "multivariance/independence.hpp"
#include "multivariance/rng.hpp"

namespace multivariance {

enum class noise_kind { normal, cauchy_cubed };
enum class sigma_pattern { constant, autoregressive, band, block };
enum class transform_kind { none, ln_square, arctan };

// Benchmark data generators:
//   tetrahedron       three pairwise independent color indicators of a
//                     four-sided die (sides 1..3 one color each, side 4 all)
//   coins(n)          n fair coins plus the parity column (sum mod 2);
//                     n-independent but dependent
//   perturbed_coins   coins variables plus r times continuous noise
//   mvnormal          N(0, Sigma) with a patterned covariance
// An optional transform is applied entrywise; `copies` concatenates that many
// independent copies of the scenario side by side.
struct scenario {
    enum class type { tetrahedron, coins, perturbed_coins, mvnormal };

    type t = type::coins;
    std::size_t n_coins = 2;
    double perturb_r = 0.5;
    noise_kind noise = noise_kind::normal;
    std::size_t dim = 0;  // mvnormal dimension
    sigma_pattern pattern = sigma_pattern::constant;
    double pattern_value = 0.1;
    std::size_t band_width = 3;
    std::size_t block_size = 5;
    transform_kind transform = transform_kind::none;
    std::vector<std::size_t> group_layout;  // empty: every column its own group
    std::size_t copies = 1;

    static scenario tetrahedron() {
        scenario s;
        s.t = type::tetrahedron;
        return s;
    }
    static scenario coins(std::size_t n) {
        scenario s;
        s.t = type::coins;
        s.n_coins = n;
        return s;
    }
    static scenario perturbed_coins(std::size_t n, double r,
                                    noise_kind noise = noise_kind::normal) {
        scenario s;
        s.t = type::perturbed_coins;
        s.n_coins = n;
        s.perturb_r = r;
        s.noise = noise;
        return s;
    }
    static scenario mvnormal(std::size_t dim, sigma_pattern pattern, double value) {
        scenario s;
        s.t = type::mvnormal;
        s.dim = dim;
        s.pattern = pattern;
        s.pattern_value = value;
        return s;
    }
};

namespace detail {

inline square_matrix sigma_for(const scenario& s) {
    const std::size_t d = s.dim;
    if (d == 0) throw usage_error("mvnormal: dimension must be > 0");
    square_matrix sigma(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) sigma(i, i) = 1.0;
    switch (s.pattern) {
        case sigma_pattern::constant:
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    if (i != j) sigma(i, j) = s.pattern_value;
            break;
        case sigma_pattern::autoregressive:
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    if (i != j)
                        sigma(i, j) = std::pow(s.pattern_value,
                                               static_cast<double>(i > j ? i - j : j - i));
            break;
        case sigma_pattern::band:
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    const std::size_t dist = i > j ? i - j : j - i;
                    if (dist > 0 && dist < s.band_width) sigma(i, j) = s.pattern_value;
                }
            break;
        case sigma_pattern::block: {
            if (s.block_size == 0) throw usage_error("mvnormal block: block size must be > 0");
            // floor(d / size) full blocks; remainder columns stay independent.
            const std::size_t blocks = d / s.block_size;
            for (std::size_t b = 0; b < blocks; ++b) {
                const std::size_t lo = b * s.block_size;
                for (std::size_t i = lo; i < lo + s.block_size; ++i)
                    for (std::size_t j = lo; j < lo + s.block_size; ++j)
                        if (i != j) sigma(i, j) = s.pattern_value;
            }
            break;
        }
    }
    return sigma;
}

// Lower-triangular Cholesky factor; throws when Sigma is not positive
// definite. Also serves as the validation demanded of the patterns.
inline square_matrix cholesky(const square_matrix& sigma) {
    const std::size_t d = sigma.size();
    square_matrix chol(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = sigma(i, j);
            for (std::size_t k = 0; k < j; ++k) sum -= chol(i, k) * chol(j, k);
            if (i == j) {
                if (sum <= 0.0)
                    throw usage_error("mvnormal: covariance pattern is not positive definite");
                chol(i, i) = std::sqrt(sum);
            } else {
                chol(i, j) = sum / chol(j, j);
            }
        }
    }
    return chol;
}

inline std::size_t base_columns(const scenario& s) {
    switch (s.t) {
        case scenario::type::tetrahedron: return 3;
        case scenario::type::coins:
        case scenario::type::perturbed_coins: return s.n_coins + 1;
        case scenario::type::mvnormal: return s.dim;
    }
    return 0;
}

inline std::string base_column_name(const scenario& s, std::size_t c) {
    switch (s.t) {
        case scenario::type::tetrahedron:
            return c == 0 ? "Red" : c == 1 ? "Green" : "Blue";
        case scenario::type::coins:
        case scenario::type::perturbed_coins:
            return c < s.n_coins ? "Coin" + std::to_string(c + 1) : "Parity";
        case scenario::type::mvnormal:
            return "X" + std::to_string(c + 1);
    }
    return {};
}

}  // namespace detail

inline dataset generate(const scenario& s, std::size_t N, rng& gen) {
    if (s.copies == 0) throw usage_error("scenario: copies must be >= 1");
    const std::size_t base_cols = detail::base_columns(s);
    if (base_cols == 0) throw usage_error("scenario: empty column set");
    const std::size_t cols = base_cols * s.copies;
    std::vector<double> values(N * cols);

    square_matrix chol;
    if (s.t == scenario::type::mvnormal) chol = detail::cholesky(detail::sigma_for(s));

    std::vector<double> z(base_cols);
    for (std::size_t copy = 0; copy < s.copies; ++copy) {
        const std::size_t offset = copy * base_cols;
        for (std::size_t r = 0; r < N; ++r) {
            double* row = values.data() + r * cols + offset;
            switch (s.t) {
                case scenario::type::tetrahedron: {
                    const std::uint64_t side = gen.uniform_below(4) + 1;
                    row[0] = (side == 1 || side == 4) ? 1.0 : 0.0;
                    row[1] = (side == 2 || side == 4) ? 1.0 : 0.0;
                    row[2] = (side == 3 || side == 4) ? 1.0 : 0.0;
                    break;
                }
                case scenario::type::coins:
                case scenario::type::perturbed_coins: {
                    std::uint64_t parity = 0;
                    for (std::size_t c = 0; c < s.n_coins; ++c) {
                        const std::uint64_t coin = gen.uniform_below(2);
                        parity ^= coin;
                        row[c] = static_cast<double>(coin);
                    }
                    row[s.n_coins] = static_cast<double>(parity);
                    if (s.t == scenario::type::perturbed_coins) {
                        for (std::size_t c = 0; c <= s.n_coins; ++c) {
                            double noise = 0.0;
                            if (s.noise == noise_kind::normal) {
                                noise = gen.normal();
                            } else {
                                const double v = gen.cauchy();
                                noise = v * v * v;
                            }
                            row[c] += s.perturb_r * noise;
                        }
                    }
                    break;
                }
                case scenario::type::mvnormal: {
                    for (std::size_t c = 0; c < base_cols; ++c) z[c] = gen.normal();
                    for (std::size_t c = 0; c < base_cols; ++c) {
                        double v = 0.0;
                        for (std::size_t k = 0; k <= c; ++k) v += chol(c, k) * z[k];
                        row[c] = v;
                    }
                    break;
                }
            }
            if (s.transform != transform_kind::none) {
                for (std::size_t c = 0; c < base_cols; ++c) {
                    row[c] = s.transform == transform_kind::ln_square
                                 ? std::log(row[c] * row[c])
                                 : std::atan(row[c]);
                }
            }
        }
    }

    std::vector<group_info> groups;
    if (s.group_layout.empty()) {
        groups.resize(cols);
        for (std::size_t c = 0; c < cols; ++c) {
            std::string name = detail::base_column_name(s, c % base_cols);
            if (s.copies > 1) name += "#" + std::to_string(c / base_cols + 1);
            groups[c] = {std::move(name), c, 1};
        }
    } else {
        std::size_t col = 0;
        for (std::size_t g = 0; g < s.group_layout.size(); ++g) {
            groups.push_back({"G" + std::to_string(g + 1), col, s.group_layout[g]});
            col += s.group_layout[g];
        }
        if (col != cols)
            throw usage_error("scenario: group layout does not cover the generated columns");
    }
    return dataset(N, cols, std::move(values), std::move(groups));
}

// ---------------------------------------------------------------------------
// Power / size studies

using dataset_generator = std::function<dataset(std::size_t, rng&)>;

struct power_config {
    std::vector<stat_kind> kinds;
    test_method method = test_method::resampling;
    double alpha = 0.05;
    std::size_t L = 300;
    double beta = 0.5;
    double C = 2.0;
    // Reuse the resampling distribution of the first run's dataset for all
    // runs of an N, instead of resampling each run separately.
    bool shared_null = false;
    std::size_t workers = 1;
    std::vector<psi_spec> psis;  // empty: euclid:1 for every group
};

struct power_cell {
    double rate = 0.0;
    double half_width = 0.0;  // 95% binomial
};

struct power_table {
    std::vector<std::size_t> Ns;
    std::vector<stat_kind> kinds;
    std::size_t runs = 0;
    std::vector<std::vector<power_cell>> cells;  // [N index][kind index]
};

inline power_table power_study(const dataset_generator& generator, const power_config& config,
                               std::span<const std::size_t> Ns, std::size_t runs, rng& gen) {
    if (runs < 1) throw usage_error("power study: runs must be >= 1");
    if (config.kinds.empty()) throw usage_error("power study: at least one statistic kind");
    if (config.method == test_method::montecarlo)
        throw usage_error("power study: Monte Carlo rejection is not part of the harness");

    power_table table;
    table.Ns.assign(Ns.begin(), Ns.end());
    table.kinds = config.kinds;
    table.runs = runs;
    table.cells.resize(Ns.size());

    const std::size_t n_kinds = config.kinds.size();
    for (std::size_t ni = 0; ni < Ns.size(); ++ni) {
        const std::size_t N = Ns[ni];
        const std::uint64_t run_base = gen.next_u64();
        const std::uint64_t null_base = gen.next_u64();

        // Shared-null mode: one replicate set, drawn from the first run's data.
        std::vector<std::vector<double>> shared_replicates;
        if (config.method == test_method::resampling && config.shared_null) {
            rng first(run_base);
            const dataset data = generator(N, first);
            const auto psis = config.psis.empty()
                                  ? std::vector<psi_spec>(data.n_groups(), psi_spec::euclid(1.0))
                                  : config.psis;
            const auto mats = centered_matrices(data, psis, scaling::normalized);
            rng null_rng(null_base);
            const std::uint64_t base = null_rng.next_u64();
            shared_replicates.assign(n_kinds, std::vector<double>(config.L));
            for (std::size_t l = 0; l < config.L; ++l) {
                rng sub(base + l);
                std::vector<std::vector<std::uint32_t>> perms(mats.size());
                for (auto& p : perms) p = random_permutation(sub, N);
                std::vector<double> vals(n_kinds);
                detail::permuted_statistics(mats, perms, config.kinds, vals);
                for (std::size_t q = 0; q < n_kinds; ++q) shared_replicates[q][l] = vals[q];
            }
        }

        std::vector<std::size_t> reject_counts(n_kinds, 0);
        std::vector<std::uint8_t> rejected(runs * n_kinds, 0);
        parallel_for(runs, config.workers, [&](std::size_t r) {
            rng run_rng(run_base + r);
            const dataset data = generator(N, run_rng);
            const auto psis = config.psis.empty()
                                  ? std::vector<psi_spec>(data.n_groups(), psi_spec::euclid(1.0))
                                  : config.psis;
            const auto mats = centered_matrices(data, psis, scaling::normalized);
            std::vector<double> observed(n_kinds);
            for (std::size_t q = 0; q < n_kinds; ++q)
                observed[q] = statistic_from_matrices(mats, config.kinds[q]);

            for (std::size_t q = 0; q < n_kinds; ++q) {
                bool reject = false;
                switch (config.method) {
                    case test_method::conservative:
                        reject = chi2_1_survival(observed[q]) <= config.alpha;
                        break;
                    case test_method::consistent:
                        reject = observed[q] >
                                 std::pow(static_cast<double>(N), 1.0 - config.beta) * config.C;
                        break;
                    case test_method::resampling: {
                        if (config.shared_null) {
                            const auto decision = detail::decide_from_replicates(
                                shared_replicates[q], observed[q], config.alpha);
                            reject = decision.reject;
                        }
                        break;
                    }
                    case test_method::montecarlo:
                        break;
                }
                if (reject) rejected[r * n_kinds + q] = 1;
            }

            if (config.method == test_method::resampling && !config.shared_null) {
                const std::uint64_t base = run_rng.next_u64();
                std::vector<std::vector<double>> replicates(n_kinds,
                                                            std::vector<double>(config.L));
                for (std::size_t l = 0; l < config.L; ++l) {
                    rng sub(base + l);
                    std::vector<std::vector<std::uint32_t>> perms(mats.size());
                    for (auto& p : perms) p = random_permutation(sub, N);
                    std::vector<double> vals(n_kinds);
                    detail::permuted_statistics(mats, perms, config.kinds, vals);
                    for (std::size_t q = 0; q < n_kinds; ++q) replicates[q][l] = vals[q];
                }
                for (std::size_t q = 0; q < n_kinds; ++q) {
                    const auto decision = detail::decide_from_replicates(
                        std::move(replicates[q]), observed[q], config.alpha);
                    if (decision.reject) rejected[r * n_kinds + q] = 1;
                }
            }
        });

        for (std::size_t r = 0; r < runs; ++r)
            for (std::size_t q = 0; q < n_kinds; ++q)
                if (rejected[r * n_kinds + q]) ++reject_counts[q];

        table.cells[ni].resize(n_kinds);
        for (std::size_t q = 0; q < n_kinds; ++q) {
            const double rate = static_cast<double>(reject_counts[q]) / static_cast<double>(runs);
            table.cells[ni][q] = {
                rate, 1.96 * std::sqrt(rate * (1.0 - rate) / static_cast<double>(runs))};
        }
    }
    return table;
}

inline power_table power_study(const scenario& s, const power_config& config,
                               std::span<const std::size_t> Ns, std::size_t runs, rng& gen) {
    return power_study(
        [&s](std::size_t N, rng& g) { return generate(s, N, g); }, config, Ns, runs, gen);
}

}  // namespace multivariance
