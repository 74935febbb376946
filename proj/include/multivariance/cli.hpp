#pragma once

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "multivariance/centering.hpp"
#include "multivariance/common.hpp"
#include "multivariance/independence.hpp"
#include "multivariance/io.hpp"
#include "multivariance/measures.hpp"
#include "multivariance/simulate.hpp"
#include "multivariance/structure.hpp"

namespace multivariance::cli {

namespace detail {

inline std::uint64_t default_seed() {
    if (const char* env = std::getenv("MULTIVARIANCE_SEED")) {
        std::uint64_t v = 0;
        const std::string s(env);
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec == std::errc{} && res.ptr == s.data() + s.size()) return v;
        throw usage_error("MULTIVARIANCE_SEED must be an unsigned integer");
    }
    return 0;
}

inline nlohmann::json metadata_json(std::uint64_t seed, const std::vector<psi_spec>& psis,
                                    const dataset& data) {
    nlohmann::json meta;
    meta["tool_version"] = tool_version;
    meta["seed"] = seed;
    nlohmann::json psi_list = nlohmann::json::array();
    for (const auto& p : psis) psi_list.push_back(to_string(p));
    meta["psi"] = psi_list;
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : data.groups()) {
        groups.push_back({{"name", g.name}, {"first_col", g.first_col + 1}, {"dim", g.dim}});
    }
    meta["groups"] = groups;
    return meta;
}

inline nlohmann::json outcome_json(const test_outcome& out) {
    nlohmann::json j;
    j["kind"] = out.kind.name();
    j["method"] = to_string(out.method);
    j["statistic"] = out.statistic;
    if (std::isfinite(out.rejection_level)) {
        j["rejection_level"] = out.rejection_level;
    } else {
        j["rejection_level"] = out.rejection_level > 0 ? "inf" : "-inf";
    }
    if (out.p_value) j["p_value"] = *out.p_value;
    j["reject"] = out.reject;
    j["alpha"] = out.alpha;
    if (out.method == test_method::resampling || out.method == test_method::montecarlo)
        j["L"] = out.replications;
    if (out.method == test_method::consistent) {
        j["beta"] = out.beta;
        j["C"] = out.threshold_constant;
    }
    if (!out.notes.empty()) j["notes"] = out.notes;
    return j;
}

struct parsed_kind {
    enum class category { statistic, total_m, mcor, mcor_unnormalized, mcor2, total_mcor_lb };
    category cat = category::statistic;
    stat_kind kind;
    std::size_t m = 0;  // total_m
};

inline parsed_kind parse_measure_kind(const std::string& text) {
    parsed_kind out;
    auto parse_suffix_size = [&](std::string_view suffix) {
        std::size_t v = 0;
        const auto res = std::from_chars(suffix.data(), suffix.data() + suffix.size(), v);
        if (res.ec != std::errc{} || res.ptr != suffix.data() + suffix.size())
            throw usage_error("kind: cannot parse '" + text + "'");
        return v;
    };
    auto parse_suffix_real = [&](std::string_view suffix) {
        double v = 0.0;
        const auto res = std::from_chars(suffix.data(), suffix.data() + suffix.size(), v);
        if (res.ec != std::errc{} || res.ptr != suffix.data() + suffix.size())
            throw usage_error("kind: cannot parse '" + text + "'");
        return v;
    };
    if (text == "multi") {
        out.kind = stat_kind::multi();
    } else if (text == "total") {
        out.kind = stat_kind::total();
    } else if (text == "m2") {
        out.kind = stat_kind::m2();
    } else if (text == "m3") {
        out.kind = stat_kind::m3();
    } else if (text.rfind("m:", 0) == 0) {
        out.kind = stat_kind::m_of(parse_suffix_size(std::string_view(text).substr(2)));
    } else if (text.rfind("lambda:", 0) == 0) {
        out.kind = stat_kind::lambda_total_of(parse_suffix_real(std::string_view(text).substr(7)));
    } else if (text.rfind("totalm:", 0) == 0) {
        out.cat = parsed_kind::category::total_m;
        out.m = parse_suffix_size(std::string_view(text).substr(7));
    } else if (text == "mcor") {
        out.cat = parsed_kind::category::mcor;
    } else if (text == "mcor_u") {
        out.cat = parsed_kind::category::mcor_unnormalized;
    } else if (text == "mcor2") {
        out.cat = parsed_kind::category::mcor2;
    } else if (text == "totalmcor_lb") {
        out.cat = parsed_kind::category::total_mcor_lb;
    } else {
        throw usage_error("kind: unknown '" + text +
                          "' (expected multi, total, m2, m3, m:<m>, totalm:<m>, lambda:<x>, "
                          "mcor, mcor_u, mcor2 or totalmcor_lb)");
    }
    return out;
}

inline std::vector<stat_kind> parse_kind_list(const std::string& text) {
    std::vector<stat_kind> kinds;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(',', start);
        const std::string item =
            pos == std::string::npos ? text.substr(start) : text.substr(start, pos - start);
        const parsed_kind pk = parse_measure_kind(item);
        if (pk.cat != parsed_kind::category::statistic)
            throw usage_error("kind list: '" + item + "' is not a test statistic");
        kinds.push_back(pk.kind);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return kinds;
}

inline scenario parse_scenario(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(':', start);
        if (pos == std::string::npos) {
            parts.push_back(text.substr(start));
            break;
        }
        parts.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    auto parse_size = [&](const std::string& tok) {
        std::size_t v = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
            throw usage_error("scenario: cannot parse integer '" + tok + "'");
        return v;
    };
    auto parse_real = [&](const std::string& tok) {
        double v = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
            throw usage_error("scenario: cannot parse number '" + tok + "'");
        return v;
    };

    const std::string& name = parts.front();
    if (name == "tetrahedron") {
        if (parts.size() != 1) throw usage_error("scenario: tetrahedron takes no parameters");
        return scenario::tetrahedron();
    }
    if (name == "coins") {
        if (parts.size() != 2) throw usage_error("scenario: expected coins:<n>");
        return scenario::coins(parse_size(parts[1]));
    }
    if (name == "perturbed_coins") {
        if (parts.size() != 3 && parts.size() != 4)
            throw usage_error("scenario: expected perturbed_coins:<n>:<r>[:normal|cauchy3]");
        noise_kind noise = noise_kind::normal;
        if (parts.size() == 4) {
            if (parts[3] == "cauchy3") {
                noise = noise_kind::cauchy_cubed;
            } else if (parts[3] != "normal") {
                throw usage_error("scenario: noise must be normal or cauchy3");
            }
        }
        return scenario::perturbed_coins(parse_size(parts[1]), parse_real(parts[2]), noise);
    }
    if (name == "mvnormal") {
        if (parts.size() < 3) throw usage_error("scenario: expected mvnormal:<dim>:<pattern>:...");
        const std::size_t dim = parse_size(parts[1]);
        const std::string& pattern = parts[2];
        if (pattern == "const" && parts.size() == 4)
            return scenario::mvnormal(dim, sigma_pattern::constant, parse_real(parts[3]));
        if (pattern == "ar" && parts.size() == 4)
            return scenario::mvnormal(dim, sigma_pattern::autoregressive, parse_real(parts[3]));
        if (pattern == "band" && parts.size() == 5) {
            scenario s = scenario::mvnormal(dim, sigma_pattern::band, parse_real(parts[3]));
            s.band_width = parse_size(parts[4]);
            return s;
        }
        if (pattern == "block" && parts.size() == 5) {
            scenario s = scenario::mvnormal(dim, sigma_pattern::block, parse_real(parts[4]));
            s.block_size = parse_size(parts[3]);
            return s;
        }
        throw usage_error(
            "scenario: expected mvnormal:<dim>:const:<c> | ar:<c> | band:<c>:<w> | "
            "block:<size>:<c>");
    }
    throw usage_error("scenario: unknown '" + name + "'");
}

inline std::vector<std::size_t> parse_size_list(const std::string& text, const char* what) {
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(',', start);
        const std::string item =
            pos == std::string::npos ? text.substr(start) : text.substr(start, pos - start);
        std::size_t v = 0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc{} || res.ptr != item.data() + item.size() || v == 0)
            throw usage_error(std::string(what) + ": cannot parse '" + item + "'");
        out.push_back(v);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace detail

// Runs the command line given as plain arguments (without the program name).
// Returns the process exit code: 0 success, 1 usage error, 2 data error.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"distance multivariance: dependence measures, independence tests and "
                 "dependence-structure detection"};
    app.require_subcommand(1);

    // ---- compute ----
    auto* compute = app.add_subcommand("compute", "evaluate a dependence measure on CSV data");
    std::string c_in, c_groups, c_psi = "euclid:1", c_kind = "multi";
    std::uint64_t c_seed = 0;
    bool c_seed_set = false;
    compute->add_option("--in", c_in, "input CSV file (header row required)")->required();
    compute->add_option("--groups", c_groups, "group spec name:first-last,... (default: one group per column)");
    compute->add_option("--psi", c_psi, "psi spec or per-group comma list (euclid:<a>, expbnd:<a>:<d>, log)");
    compute->add_option("--kind", c_kind,
                        "multi|total|m2|m3|m:<m>|totalm:<m>|lambda:<x>|mcor|mcor_u|mcor2|totalmcor_lb");
    compute->add_option("--seed", c_seed, "seed recorded in the output metadata")
        ->each([&](const std::string&) { c_seed_set = true; });

    // ---- test ----
    auto* test = app.add_subcommand("test", "run an independence test on CSV data");
    std::string t_in, t_groups, t_psi = "euclid:1", t_kind = "multi", t_method = "conservative";
    double t_alpha = 0.05, t_beta = 0.5, t_C = 2.0;
    std::size_t t_L = 300, t_workers = 1;
    std::uint64_t t_seed = 0;
    bool t_seed_set = false;
    test->add_option("--in", t_in, "input CSV file")->required();
    test->add_option("--groups", t_groups, "group spec");
    test->add_option("--psi", t_psi, "psi spec");
    test->add_option("--kind", t_kind, "multi|total|m2|m3|comb");
    test->add_option("--method", t_method, "conservative|resampling|consistent");
    test->add_option("--alpha", t_alpha, "significance level");
    test->add_option("--L", t_L, "resampling replications");
    test->add_option("--beta", t_beta, "consistent threshold exponent");
    test->add_option("--C", t_C, "consistent threshold constant");
    test->add_option("--seed", t_seed, "seed for the resampling permutations")
        ->each([&](const std::string&) { t_seed_set = true; });
    test->add_option("--workers", t_workers, "worker threads (default 1 for bit-stable output)");

    // ---- structure ----
    auto* structure = app.add_subcommand("structure", "detect the dependence structure");
    std::string s_in, s_groups, s_psi = "euclid:1", s_mode = "clustered",
                s_decision = "conservative", s_label = "statistic", s_out;
    double s_alpha = 0.05, s_beta = 0.5, s_C = 2.0;
    std::size_t s_L = 300, s_workers = 1;
    std::uint64_t s_seed = 0;
    bool s_seed_set = false;
    structure->add_option("--in", s_in, "input CSV file")->required();
    structure->add_option("--groups", s_groups, "group spec");
    structure->add_option("--psi", s_psi, "psi spec");
    structure->add_option("--mode", s_mode, "full|clustered");
    structure->add_option("--decision", s_decision, "conservative|resampling|consistent");
    structure->add_option("--alpha", s_alpha, "significance level");
    structure->add_option("--L", s_L, "resampling replications");
    structure->add_option("--beta", s_beta, "consistent threshold exponent");
    structure->add_option("--C", s_C, "consistent threshold constant");
    structure->add_option("--label", s_label, "dependency node labels: statistic|order|p_value");
    structure->add_option("--out", s_out, "output file, .dot or .json")->required();
    structure->add_option("--seed", s_seed, "seed")->each([&](const std::string&) {
        s_seed_set = true;
    });
    structure->add_option("--workers", s_workers, "worker threads");

    // ---- simulate ----
    auto* simulate = app.add_subcommand("simulate", "generate benchmark scenario data as CSV");
    std::string g_scenario, g_layout, g_transform = "none", g_out;
    std::size_t g_N = 100, g_copies = 1;
    std::uint64_t g_seed = 0;
    bool g_seed_set = false;
    simulate->add_option("--scenario", g_scenario,
                         "tetrahedron | coins:<n> | perturbed_coins:<n>:<r>[:normal|cauchy3] | "
                         "mvnormal:<dim>:const:<c>|ar:<c>|band:<c>:<w>|block:<size>:<c>")
        ->required();
    simulate->add_option("--N", g_N, "sample count");
    simulate->add_option("--copies", g_copies, "independent copies of the scenario, concatenated");
    simulate->add_option("--transform", g_transform, "none|ln_square|arctan");
    simulate->add_option("--group-layout", g_layout, "comma list of group dimensions");
    simulate->add_option("--out", g_out, "output CSV file")->required();
    simulate->add_option("--seed", g_seed, "seed")->each([&](const std::string&) {
        g_seed_set = true;
    });

    // ---- power ----
    auto* power = app.add_subcommand("power", "empirical power/size study over sample sizes");
    std::string p_scenario, p_layout, p_transform = "none", p_kinds = "total", p_method = "resampling",
                p_psi = "euclid:1", p_out, p_Ns = "100";
    double p_alpha = 0.05, p_beta = 0.5, p_C = 2.0;
    std::size_t p_L = 300, p_runs = 1000, p_copies = 1, p_workers = 1;
    bool p_shared = false;
    std::uint64_t p_seed = 0;
    bool p_seed_set = false;
    power->add_option("--scenario", p_scenario, "scenario (see simulate)")->required();
    power->add_option("--copies", p_copies, "independent copies of the scenario");
    power->add_option("--transform", p_transform, "none|ln_square|arctan");
    power->add_option("--group-layout", p_layout, "comma list of group dimensions");
    power->add_option("--kind", p_kinds, "comma list of statistics (multi,total,m2,m3,m:<m>,lambda:<x>)");
    power->add_option("--method", p_method, "conservative|resampling|consistent");
    power->add_option("--alpha", p_alpha, "significance level");
    power->add_option("--L", p_L, "resampling replications");
    power->add_option("--beta", p_beta, "consistent threshold exponent");
    power->add_option("--C", p_C, "consistent threshold constant");
    power->add_option("--runs", p_runs, "runs per sample size");
    power->add_option("--Ns", p_Ns, "comma list of sample sizes");
    power->add_flag("--shared-null", p_shared,
                    "reuse the resampling distribution of one run for all runs");
    power->add_option("--psi", p_psi, "psi spec");
    power->add_option("--out", p_out, "output CSV file (default: stdout)");
    power->add_option("--seed", p_seed, "seed")->each([&](const std::string&) {
        p_seed_set = true;
    });
    power->add_option("--workers", p_workers, "worker threads");

    try {
        std::vector<const char*> argv;
        argv.push_back("multivariance");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        // CLI11 prints help/usage; --help exits 0, everything else is a usage error.
        std::ostream& stream = e.get_exit_code() == 0 ? out : err;
        const int code = app.exit(e, stream, stream);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*compute) {
            const std::uint64_t seed = c_seed_set ? c_seed : detail::default_seed();
            const dataset data = ingest_csv(c_in, c_groups);
            const auto psis = parse_psi_list(c_psi, data.n_groups());
            const auto pk = detail::parse_measure_kind(c_kind);
            const double N = static_cast<double>(data.rows());

            nlohmann::json j = detail::metadata_json(seed, psis, data);
            j["kind"] = c_kind;
            j["n"] = data.n_groups();
            j["N"] = data.rows();
            using cat = detail::parsed_kind::category;
            if (pk.cat == cat::statistic) {
                if (pk.kind.t == stat_kind::type::lambda_total) {
                    const auto raw = centered_matrices(data, psis, scaling::raw);
                    j["squared_value"] = sample_lambda_total(raw, pk.kind.lambda);
                    j["statistic"] = test_statistic(data, psis, pk.kind);
                } else {
                    const auto mats = centered_matrices(data, psis, scaling::normalized);
                    double sq = 0.0;
                    switch (pk.kind.t) {
                        case stat_kind::type::multi:
                            sq = sample_multivariance(mats);
                            break;
                        case stat_kind::type::total:
                            sq = sample_total_multivariance(mats, true);
                            break;
                        case stat_kind::type::m_multi:
                            sq = sample_m_multivariance(
                                mats, pk.kind.m,
                                pk.kind.m <= 3 ? m_method::fast : m_method::naive, true);
                            break;
                        case stat_kind::type::lambda_total:
                            break;
                    }
                    j["squared_value"] = sq;
                    j["statistic"] = std::max(0.0, N * sq);
                }
            } else if (pk.cat == cat::total_m) {
                const auto mats = centered_matrices(data, psis, scaling::normalized);
                j["squared_value"] = sample_total_m_multivariance(mats, pk.m);
            } else {
                correlation_value cv;
                if (pk.cat == cat::mcor) {
                    cv = multicorrelation(data, psis, scaling::r_scaled);
                } else if (pk.cat == cat::mcor_unnormalized) {
                    cv = multicorrelation(data, psis, scaling::mcor_scaled);
                } else if (pk.cat == cat::mcor2) {
                    cv = mcor2(data, psis);
                } else {
                    cv = total_mcor_lower_bound(data, psis);
                }
                if (pk.cat == cat::total_mcor_lb) {
                    j["squared_value"] = cv.value;
                } else {
                    j["value"] = cv.value;
                    j["squared_value"] = cv.value * cv.value;
                }
                if (cv.degenerate) j["degenerate"] = true;
                if (cv.negative_radicand) j["negative_radicand"] = true;
            }
            out << j.dump(2) << "\n";
            return 0;
        }

        if (*test) {
            const std::uint64_t seed = t_seed_set ? t_seed : detail::default_seed();
            const dataset data = ingest_csv(t_in, t_groups);
            const auto psis = parse_psi_list(t_psi, data.n_groups());
            rng gen(seed);

            nlohmann::json j = detail::metadata_json(seed, psis, data);
            if (t_kind == "comb") {
                test_method method;
                if (t_method == "conservative") {
                    method = test_method::conservative;
                } else if (t_method == "resampling") {
                    method = test_method::resampling;
                } else {
                    throw usage_error("test: comb supports conservative or resampling");
                }
                const auto result =
                    combined_test(data, psis, t_alpha, method, t_L, &gen, t_workers);
                nlohmann::json components = nlohmann::json::array();
                for (const auto& o : result.components) components.push_back(detail::outcome_json(o));
                j["kind"] = "comb";
                j["method"] = t_method;
                j["alpha"] = result.alpha;
                j["components"] = components;
                j["adjusted_p"] = result.adjusted_p;
                j["reject"] = result.reject;
            } else {
                const auto pk = detail::parse_measure_kind(t_kind);
                if (pk.cat != detail::parsed_kind::category::statistic)
                    throw usage_error("test: kind must be multi, total, m2, m3 or comb");
                test_outcome outcome;
                if (t_method == "conservative") {
                    const double stat = test_statistic(data, psis, pk.kind);
                    outcome = conservative_test(stat, t_alpha, pk.kind);
                    multivariance::detail::append_kind_notes(pk.kind, data.n_groups(), outcome.notes);
                    multivariance::detail::append_psi_notes(psis, outcome.notes);
                } else if (t_method == "resampling") {
                    outcome = resampling_test(data, psis, pk.kind, t_L, t_alpha, gen, t_workers);
                } else if (t_method == "consistent") {
                    const double stat = test_statistic(data, psis, pk.kind);
                    outcome = consistent_test(stat, data.rows(), t_beta, t_C, pk.kind);
                    multivariance::detail::append_kind_notes(pk.kind, data.n_groups(), outcome.notes);
                    multivariance::detail::append_psi_notes(psis, outcome.notes);
                } else {
                    throw usage_error("test: method must be conservative, resampling or consistent");
                }
                j.update(detail::outcome_json(outcome));
            }
            out << j.dump(2) << "\n";
            return 0;
        }

        if (*structure) {
            const std::uint64_t seed = s_seed_set ? s_seed : detail::default_seed();
            const dataset data = ingest_csv(s_in, s_groups);
            const auto psis = parse_psi_list(s_psi, data.n_groups());
            rng gen(seed);

            detection_options options;
            if (s_mode == "full") {
                options.mode = detection_mode::full;
            } else if (s_mode == "clustered") {
                options.mode = detection_mode::clustered;
            } else {
                throw usage_error("structure: mode must be full or clustered");
            }
            if (s_decision == "conservative") {
                options.decision = decision_method::conservative;
            } else if (s_decision == "resampling") {
                options.decision = decision_method::resampling;
            } else if (s_decision == "consistent") {
                options.decision = decision_method::consistent;
            } else {
                throw usage_error("structure: decision must be conservative, resampling or consistent");
            }
            if (s_label == "statistic") {
                options.label = label_kind::statistic;
            } else if (s_label == "order") {
                options.label = label_kind::order;
            } else if (s_label == "p_value") {
                options.label = label_kind::p_value;
            } else {
                throw usage_error("structure: label must be statistic, order or p_value");
            }
            options.alpha = s_alpha;
            options.L = s_L;
            options.beta = s_beta;
            options.C = s_C;
            options.workers = s_workers;

            dependency_graph graph = detect_structure(data, psis, options, gen);
            graph.metadata.seed = seed;
            for (const auto& p : psis) graph.metadata.psi.push_back(to_string(p));
            for (const auto& note : graph.metadata.notes) err << "warning: " << note << "\n";

            std::string text;
            if (s_out.size() >= 4 && s_out.substr(s_out.size() - 4) == ".dot") {
                text = to_dot(graph);
            } else if (s_out.size() >= 5 && s_out.substr(s_out.size() - 5) == ".json") {
                text = to_json(graph);
            } else {
                throw usage_error("structure: --out must end in .dot or .json");
            }
            std::ofstream file(s_out);
            if (!file) throw data_error("cannot write '" + s_out + "'");
            file << text;
            out << "nodes: " << graph.nodes.size() << ", edges: " << graph.edges.size()
                << ", dependency nodes: " << graph.count(node_kind::dependency) << ", written to "
                << s_out << "\n";
            return 0;
        }

        if (*simulate) {
            const std::uint64_t seed = g_seed_set ? g_seed : detail::default_seed();
            scenario s = detail::parse_scenario(g_scenario);
            s.copies = g_copies;
            if (g_transform == "ln_square") {
                s.transform = transform_kind::ln_square;
            } else if (g_transform == "arctan") {
                s.transform = transform_kind::arctan;
            } else if (g_transform != "none") {
                throw usage_error("simulate: transform must be none, ln_square or arctan");
            }
            if (!g_layout.empty()) s.group_layout = detail::parse_size_list(g_layout, "group layout");
            rng gen(seed);
            const dataset data = generate(s, g_N, gen);
            std::ofstream file(g_out);
            if (!file) throw data_error("cannot write '" + g_out + "'");
            file << dataset_to_csv(data);
            out << "wrote " << data.rows() << " samples x " << data.cols() << " columns to "
                << g_out << "\n";
            return 0;
        }

        if (*power) {
            const std::uint64_t seed = p_seed_set ? p_seed : detail::default_seed();
            scenario s = detail::parse_scenario(p_scenario);
            s.copies = p_copies;
            if (p_transform == "ln_square") {
                s.transform = transform_kind::ln_square;
            } else if (p_transform == "arctan") {
                s.transform = transform_kind::arctan;
            } else if (p_transform != "none") {
                throw usage_error("power: transform must be none, ln_square or arctan");
            }
            if (!p_layout.empty()) s.group_layout = detail::parse_size_list(p_layout, "group layout");

            power_config config;
            config.kinds = detail::parse_kind_list(p_kinds);
            if (p_method == "conservative") {
                config.method = test_method::conservative;
            } else if (p_method == "resampling") {
                config.method = test_method::resampling;
            } else if (p_method == "consistent") {
                config.method = test_method::consistent;
            } else {
                throw usage_error("power: method must be conservative, resampling or consistent");
            }
            config.alpha = p_alpha;
            config.L = p_L;
            config.beta = p_beta;
            config.C = p_C;
            config.shared_null = p_shared;
            config.workers = p_workers;

            const auto Ns = detail::parse_size_list(p_Ns, "Ns");
            rng gen(seed);
            const power_table table = power_study(s, config, Ns, p_runs, gen);

            std::ostringstream csv;
            csv << "N,kind,method,alpha,runs,rate,half_width\n";
            for (std::size_t ni = 0; ni < table.Ns.size(); ++ni) {
                for (std::size_t q = 0; q < table.kinds.size(); ++q) {
                    csv << table.Ns[ni] << "," << table.kinds[q].name() << "," << p_method << ","
                        << p_alpha << "," << table.runs << "," << table.cells[ni][q].rate << ","
                        << table.cells[ni][q].half_width << "\n";
                }
            }
            if (p_out.empty()) {
                out << csv.str();
            } else {
                std::ofstream file(p_out);
                if (!file) throw data_error("cannot write '" + p_out + "'");
                file << csv.str();
                out << "wrote power table to " << p_out << "\n";
            }
            return 0;
        }
    } catch (const usage_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace multivariance::cli
