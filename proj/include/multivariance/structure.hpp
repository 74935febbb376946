#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "multivariance/centering.hpp"
#include "multivariance/common.hpp"
#include "multivariance/dataset.hpp"
#include "multivariance/independence.hpp"
#include "multivariance/special.hpp"

namespace multivariance {

enum class node_kind { variable, cluster, dependency };
enum class detection_mode { full, clustered };
enum class decision_method { conservative, resampling, consistent };
enum class label_kind { statistic, order, p_value };

struct detection_options {
    detection_mode mode = detection_mode::clustered;
    decision_method decision = decision_method::conservative;
    double alpha = 0.05;
    std::size_t L = 300;   // resampling replications
    double beta = 0.5;     // consistent threshold exponent
    double C = 2.0;        // consistent threshold constant
    label_kind label = label_kind::statistic;
    std::size_t workers = 1;

    void validate() const {
        if (decision == decision_method::conservative && (!(alpha > 0.0) || alpha > 0.215))
            throw usage_error("structure detection: conservative alpha must lie in (0, 0.215]");
        if (decision == decision_method::resampling && (!(alpha > 0.0) || !(alpha < 1.0)))
            throw usage_error("structure detection: alpha must lie in (0, 1)");
        if (decision == decision_method::consistent) {
            if (!(beta > 0.0) || !(beta < 1.0))
                throw usage_error("structure detection: beta must lie in (0, 1)");
            if (!(C > 0.0)) throw usage_error("structure detection: C must be > 0");
        }
    }
};

struct graph_node {
    std::string id;
    node_kind kind = node_kind::variable;
    std::string label;
    std::vector<std::size_t> members;  // variable indices, sorted
    std::size_t order = 0;             // dependency nodes
    double statistic = 0.0;            // dependency nodes
    std::optional<double> p_value;     // dependency nodes, when the decision provides one
};

struct graph_edge {
    std::string from;
    std::string to;
};

struct graph_metadata {
    std::size_t n = 0;
    std::size_t N = 0;
    detection_options options;
    std::size_t tests_performed = 0;
    std::optional<double> type_i_bound;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> psi;
    std::vector<std::string> notes;
};

struct dependency_graph {
    std::vector<graph_node> nodes;
    std::vector<graph_edge> edges;
    graph_metadata metadata;

    std::size_t count(node_kind k) const {
        std::size_t c = 0;
        for (const auto& node : nodes)
            if (node.kind == k) ++c;
        return c;
    }
};

// Upper bound for the family-wise type-I probability of k consistent-threshold
// tests: 1 - (1 - q)^k with q the chi^2_1 tail probability beyond N^(1-beta)*C.
inline double type_i_bound(std::size_t k, std::size_t N, double beta, double C) {
    if (k == 0) return 0.0;
    const double level = std::pow(static_cast<double>(N), 1.0 - beta) * C;
    const double q = chi2_1_survival(level);
    return -std::expm1(static_cast<double>(k) * std::log1p(-q));
}

namespace detail {

inline std::string format_value(double v) {
    std::ostringstream out;
    out.precision(6);
    out << v;
    return out.str();
}

struct tuple_test {
    std::vector<std::size_t> units;  // indices into the current unit list
    double statistic = 0.0;
    double raw_p = 0.0;
    double adjusted_p = 0.0;
    bool flagged = false;
};

// Runs the decision rule on a batch of tuple statistics. Conservative and
// resampling p-values are Holm-adjusted within the batch before flagging;
// the consistent rule compares each statistic against N^(1-beta)*C.
inline void decide_batch(std::vector<tuple_test>& batch, const detection_options& options,
                         std::size_t N) {
    if (batch.empty()) return;
    if (options.decision == decision_method::consistent) {
        const double level = std::pow(static_cast<double>(N), 1.0 - options.beta) * options.C;
        for (auto& t : batch) t.flagged = t.statistic > level;
        return;
    }
    std::vector<double> p(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) p[i] = batch[i].raw_p;
    const auto adjusted = holm_adjust(p);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        batch[i].adjusted_p = adjusted[i];
        batch[i].flagged = adjusted[i] <= options.alpha;
    }
}

inline std::string node_label(const graph_node& node, const detection_options& options) {
    switch (options.label) {
        case label_kind::order:
            return std::to_string(node.order);
        case label_kind::p_value:
            if (node.p_value) return format_value(*node.p_value);
            return format_value(node.statistic);
        case label_kind::statistic:
            break;
    }
    return format_value(node.statistic);
}

}  // namespace detail

// Full dependence structure: for m ascending every m-tuple whose proper
// sub-tuples all stayed unflagged is tested for m-dependence; flagged tuples
// become dependency nodes connected to their member variables.
inline dependency_graph detect_full(const dataset& data, std::span<const psi_spec> psis,
                                    const detection_options& options, rng& gen) {
    options.validate();
    if (data.n_groups() < 2) throw usage_error("detect_full: at least 2 variable groups required");

    const std::size_t n = data.n_groups();
    const std::size_t N = data.rows();

    dependency_graph graph;
    graph.metadata.n = n;
    graph.metadata.N = N;
    graph.metadata.options = options;
    if (n > 15) {
        graph.metadata.notes.push_back(
            "cost warning: the number of tuples grows like 2^n; n = " + std::to_string(n));
    }

    for (std::size_t v = 0; v < n; ++v) {
        graph.nodes.push_back(
            {"v" + std::to_string(v), node_kind::variable, data.group(v).name, {v}, 0, 0.0, {}});
    }

    const auto mats = centered_matrices(data, psis, scaling::normalized);
    std::vector<std::vector<std::size_t>> flagged_sets;
    std::size_t dep_seq = 0;

    for (std::size_t m = 2; m <= n; ++m) {
        std::vector<detail::tuple_test> batch;
        detail::for_each_subset(n, m, [&](std::span<const std::size_t> subset) {
            for (const auto& f : flagged_sets) {
                if (std::includes(subset.begin(), subset.end(), f.begin(), f.end())) return;
            }
            detail::tuple_test t;
            t.units.assign(subset.begin(), subset.end());
            batch.push_back(std::move(t));
        });
        if (batch.empty()) continue;

        for (auto& t : batch) {
            std::vector<centered_matrix> sub;
            sub.reserve(m);
            for (std::size_t i : t.units) sub.push_back(mats[i]);
            t.statistic = statistic_from_matrices(sub, stat_kind::multi());
            if (options.decision == decision_method::conservative) {
                t.raw_p = chi2_1_survival(t.statistic);
            } else if (options.decision == decision_method::resampling) {
                auto replicates = resampling_replicates(sub, stat_kind::multi(), options.L, gen,
                                                        {}, options.workers);
                const auto decision =
                    detail::decide_from_replicates(std::move(replicates), t.statistic, options.alpha);
                t.raw_p = decision.p_value;
            }
        }
        graph.metadata.tests_performed += batch.size();
        detail::decide_batch(batch, options, N);

        for (const auto& t : batch) {
            if (!t.flagged) continue;
            graph_node node;
            node.id = "d" + std::to_string(dep_seq++);
            node.kind = node_kind::dependency;
            node.members = t.units;
            node.order = m;
            node.statistic = t.statistic;
            if (options.decision != decision_method::consistent) node.p_value = t.adjusted_p;
            node.label = detail::node_label(node, options);
            for (std::size_t v : t.units) graph.edges.push_back({node.id, "v" + std::to_string(v)});
            graph.nodes.push_back(std::move(node));
            flagged_sets.push_back(t.units);
        }
    }

    if (options.decision == decision_method::consistent) {
        graph.metadata.type_i_bound =
            type_i_bound(graph.metadata.tests_performed, N, options.beta, options.C);
    }
    return graph;
}

// Clustered dependence structure. Connected variables form clusters that are
// re-tested as single concatenated variables; each detection merges clusters
// and restarts the sweep at pair level. A registry of tested variable sets
// prevents repeated tests and guarantees termination.
inline dependency_graph detect_clustered(const dataset& data, std::span<const psi_spec> psis,
                                         const detection_options& options, rng& gen) {
    options.validate();
    if (data.n_groups() < 2)
        throw usage_error("detect_clustered: at least 2 variable groups required");

    const std::size_t n = data.n_groups();
    const std::size_t N = data.rows();

    dependency_graph graph;
    graph.metadata.n = n;
    graph.metadata.N = N;
    graph.metadata.options = options;
    if (n > 15) {
        graph.metadata.notes.push_back(
            "cost warning: the number of tuples grows like 2^n; n = " + std::to_string(n));
    }

    for (std::size_t v = 0; v < n; ++v) {
        graph.nodes.push_back(
            {"v" + std::to_string(v), node_kind::variable, data.group(v).name, {v}, 0, 0.0, {}});
    }

    struct cluster {
        std::vector<std::size_t> members;  // variable indices, sorted
        std::string rep_id;                // attachment node for new dependency edges
        bool rep_is_node = true;           // false until the cluster node is created lazily
    };

    std::vector<cluster> clusters(n);
    for (std::size_t v = 0; v < n; ++v) {
        clusters[v] = {{v}, "v" + std::to_string(v), true};
    }

    // Matrices per tested unit, keyed by its sorted variable set.
    std::map<std::vector<std::size_t>, centered_matrix> matrix_cache;
    auto unit_matrix = [&](const cluster& c) -> const centered_matrix& {
        auto it = matrix_cache.find(c.members);
        if (it == matrix_cache.end()) {
            const psi_spec& psi = psis[c.members.front()];
            centered_matrix mat;
            if (c.members.size() == 1) {
                mat = centered_matrix_for(data, c.members.front(), psi, scaling::normalized);
            } else {
                const dataset merged = data.regrouped({c.members});
                mat = centered_matrix_for(merged, 0, psi, scaling::normalized);
            }
            it = matrix_cache.emplace(c.members, std::move(mat)).first;
        }
        return it->second;
    };

    std::set<std::vector<std::size_t>> registry;  // tested union variable sets
    std::size_t dep_seq = 0;
    std::size_t cluster_seq = 0;

    // Lazily materialize the cluster node the first time a multi-variable
    // cluster takes part in a flagged detection. It fans out to its member
    // variables, so dependency nodes only ever touch variable or cluster
    // nodes and keep degree equal to their order.
    auto attachment_id = [&](cluster& c) -> std::string {
        if (c.rep_is_node) return c.rep_id;
        graph_node node;
        node.id = "c" + std::to_string(cluster_seq++);
        node.kind = node_kind::cluster;
        node.members = c.members;
        std::string label = "{";
        for (std::size_t i = 0; i < c.members.size(); ++i) {
            if (i > 0) label += ",";
            label += data.group(c.members[i]).name;
        }
        label += "}";
        node.label = std::move(label);
        for (std::size_t v : c.members) graph.edges.push_back({node.id, "v" + std::to_string(v)});
        graph.nodes.push_back(node);
        c.rep_id = node.id;
        c.rep_is_node = true;
        return c.rep_id;
    };

    bool sweeping = true;
    while (sweeping) {
        sweeping = false;
        const std::size_t k = clusters.size();
        for (std::size_t m = 2; m <= k && !sweeping; ++m) {
            std::vector<detail::tuple_test> batch;
            detail::for_each_subset(k, m, [&](std::span<const std::size_t> subset) {
                std::vector<std::size_t> union_set;
                for (std::size_t ci : subset) {
                    union_set.insert(union_set.end(), clusters[ci].members.begin(),
                                     clusters[ci].members.end());
                }
                std::sort(union_set.begin(), union_set.end());
                if (registry.count(union_set)) return;
                detail::tuple_test t;
                t.units.assign(subset.begin(), subset.end());
                batch.push_back(std::move(t));
            });
            if (batch.empty()) continue;

            for (auto& t : batch) {
                std::vector<centered_matrix> sub;
                sub.reserve(m);
                std::vector<std::size_t> union_set;
                for (std::size_t ci : t.units) {
                    sub.push_back(unit_matrix(clusters[ci]));
                    union_set.insert(union_set.end(), clusters[ci].members.begin(),
                                     clusters[ci].members.end());
                }
                std::sort(union_set.begin(), union_set.end());
                registry.insert(std::move(union_set));

                t.statistic = statistic_from_matrices(sub, stat_kind::multi());
                if (options.decision == decision_method::conservative) {
                    t.raw_p = chi2_1_survival(t.statistic);
                } else if (options.decision == decision_method::resampling) {
                    auto replicates = resampling_replicates(sub, stat_kind::multi(), options.L,
                                                            gen, {}, options.workers);
                    const auto decision = detail::decide_from_replicates(std::move(replicates),
                                                                         t.statistic, options.alpha);
                    t.raw_p = decision.p_value;
                }
            }
            graph.metadata.tests_performed += batch.size();
            detail::decide_batch(batch, options, N);

            std::vector<std::size_t> parent(k);
            for (std::size_t i = 0; i < k; ++i) parent[i] = i;
            std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
                while (parent[x] != x) x = parent[x] = parent[parent[x]];
                return x;
            };

            bool any_flagged = false;
            for (const auto& t : batch) {
                if (!t.flagged) continue;
                any_flagged = true;
                graph_node node;
                node.id = "d" + std::to_string(dep_seq++);
                node.kind = node_kind::dependency;
                node.order = m;
                node.statistic = t.statistic;
                if (options.decision != decision_method::consistent) node.p_value = t.adjusted_p;
                for (std::size_t ci : t.units) {
                    node.members.insert(node.members.end(), clusters[ci].members.begin(),
                                        clusters[ci].members.end());
                    graph.edges.push_back({node.id, attachment_id(clusters[ci])});
                    parent[find(ci)] = find(t.units.front());
                }
                std::sort(node.members.begin(), node.members.end());
                node.label = detail::node_label(node, options);
                graph.nodes.push_back(std::move(node));
            }

            if (any_flagged) {
                // Rebuild the cluster list from the merge components.
                std::set<std::size_t> changed_roots;
                for (const auto& t : batch) {
                    if (t.flagged) changed_roots.insert(find(t.units.front()));
                }
                std::map<std::size_t, cluster> merged;
                for (std::size_t i = 0; i < k; ++i) {
                    const std::size_t root = find(i);
                    auto& c = merged[root];
                    c.members.insert(c.members.end(), clusters[i].members.begin(),
                                     clusters[i].members.end());
                }
                std::vector<cluster> next;
                next.reserve(merged.size());
                for (auto& [root, c] : merged) {
                    std::sort(c.members.begin(), c.members.end());
                    if (changed_roots.count(root) == 0) {
                        // untouched cluster: keep its representative
                        next.push_back(clusters[root]);
                    } else {
                        c.rep_is_node = false;
                        next.push_back(std::move(c));
                    }
                }
                clusters = std::move(next);
                sweeping = true;  // restart at m = 2 with the rebuilt list
            }
        }
    }

    if (options.decision == decision_method::consistent) {
        graph.metadata.type_i_bound =
            type_i_bound(graph.metadata.tests_performed, N, options.beta, options.C);
    }
    return graph;
}

inline dependency_graph detect_structure(const dataset& data, std::span<const psi_spec> psis,
                                         const detection_options& options, rng& gen) {
    return options.mode == detection_mode::full ? detect_full(data, psis, options, gen)
                                                : detect_clustered(data, psis, options, gen);
}

// ---------------------------------------------------------------------------
// Export

inline std::string to_dot(const dependency_graph& graph) {
    auto escape = [](const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
        }
        return out;
    };
    std::ostringstream out;
    out << "graph dependence_structure {\n";
    for (const auto& node : graph.nodes) {
        const char* shape = node.kind == node_kind::variable ? "circle"
                            : node.kind == node_kind::cluster ? "box"
                                                              : "none";
        out << "  \"" << escape(node.id) << "\" [shape=" << shape << ", label=\""
            << escape(node.label) << "\"];\n";
    }
    for (const auto& edge : graph.edges) {
        out << "  \"" << escape(edge.from) << "\" -- \"" << escape(edge.to) << "\";\n";
    }
    out << "}\n";
    return out.str();
}

namespace detail {

inline const char* to_text(node_kind k) {
    switch (k) {
        case node_kind::variable: return "variable";
        case node_kind::cluster: return "cluster";
        case node_kind::dependency: return "dependency";
    }
    return "";
}

inline node_kind node_kind_from(const std::string& s) {
    if (s == "variable") return node_kind::variable;
    if (s == "cluster") return node_kind::cluster;
    if (s == "dependency") return node_kind::dependency;
    throw data_error("graph json: unknown node kind '" + s + "'");
}

inline const char* to_text(detection_mode m) {
    return m == detection_mode::full ? "full" : "clustered";
}
inline const char* to_text(decision_method d) {
    switch (d) {
        case decision_method::conservative: return "conservative";
        case decision_method::resampling: return "resampling";
        case decision_method::consistent: return "consistent";
    }
    return "";
}
inline const char* to_text(label_kind l) {
    switch (l) {
        case label_kind::statistic: return "statistic";
        case label_kind::order: return "order";
        case label_kind::p_value: return "p_value";
    }
    return "";
}

}  // namespace detail

inline constexpr int graph_schema_version = 1;

inline std::string to_json(const dependency_graph& graph) {
    nlohmann::json j;
    j["schema_version"] = graph_schema_version;

    nlohmann::json meta;
    meta["tool_version"] = tool_version;
    meta["n"] = graph.metadata.n;
    meta["N"] = graph.metadata.N;
    meta["mode"] = detail::to_text(graph.metadata.options.mode);
    meta["label"] = detail::to_text(graph.metadata.options.label);
    nlohmann::json decision;
    decision["method"] = detail::to_text(graph.metadata.options.decision);
    switch (graph.metadata.options.decision) {
        case decision_method::conservative:
            decision["alpha"] = graph.metadata.options.alpha;
            break;
        case decision_method::resampling:
            decision["alpha"] = graph.metadata.options.alpha;
            decision["L"] = graph.metadata.options.L;
            break;
        case decision_method::consistent:
            decision["beta"] = graph.metadata.options.beta;
            decision["C"] = graph.metadata.options.C;
            break;
    }
    meta["decision"] = decision;
    meta["tests_performed"] = graph.metadata.tests_performed;
    if (graph.metadata.type_i_bound) meta["type_i_bound"] = *graph.metadata.type_i_bound;
    if (graph.metadata.seed) meta["seed"] = *graph.metadata.seed;
    if (!graph.metadata.psi.empty()) meta["psi"] = graph.metadata.psi;
    if (!graph.metadata.notes.empty()) meta["notes"] = graph.metadata.notes;
    j["metadata"] = meta;

    j["nodes"] = nlohmann::json::array();
    for (const auto& node : graph.nodes) {
        nlohmann::json nj;
        nj["id"] = node.id;
        nj["kind"] = detail::to_text(node.kind);
        nj["label"] = node.label;
        nj["members"] = node.members;
        if (node.kind == node_kind::dependency) {
            nj["order"] = node.order;
            nj["statistic"] = node.statistic;
            if (node.p_value) nj["p_value"] = *node.p_value;
        }
        j["nodes"].push_back(nj);
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& edge : graph.edges) {
        j["edges"].push_back({{"from", edge.from}, {"to", edge.to}});
    }
    return j.dump(2) + "\n";
}

// Restores the node and edge lists (and the plain metadata counters) from the
// JSON export; used for round-trip checks and downstream tooling.
inline dependency_graph graph_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(std::string("graph json: ") + e.what());
    }
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != graph_schema_version)
        throw data_error("graph json: unsupported schema version");
    dependency_graph graph;
    if (j.contains("metadata")) {
        const auto& meta = j["metadata"];
        graph.metadata.n = meta.value("n", std::size_t{0});
        graph.metadata.N = meta.value("N", std::size_t{0});
        graph.metadata.tests_performed = meta.value("tests_performed", std::size_t{0});
        if (meta.contains("type_i_bound"))
            graph.metadata.type_i_bound = meta["type_i_bound"].get<double>();
        if (meta.contains("seed")) graph.metadata.seed = meta["seed"].get<std::uint64_t>();
        if (meta.contains("psi")) graph.metadata.psi = meta["psi"].get<std::vector<std::string>>();
    }
    for (const auto& nj : j["nodes"]) {
        graph_node node;
        node.id = nj.at("id").get<std::string>();
        node.kind = detail::node_kind_from(nj.at("kind").get<std::string>());
        node.label = nj.value("label", std::string{});
        node.members = nj.value("members", std::vector<std::size_t>{});
        node.order = nj.value("order", std::size_t{0});
        node.statistic = nj.value("statistic", 0.0);
        if (nj.contains("p_value")) node.p_value = nj["p_value"].get<double>();
        graph.nodes.push_back(std::move(node));
    }
    for (const auto& ej : j["edges"]) {
        graph.edges.push_back({ej.at("from").get<std::string>(), ej.at("to").get<std::string>()});
    }
    return graph;
}

}  // namespace multivariance
