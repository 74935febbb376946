#pragma once

#include <charconv>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "multivariance/common.hpp"

namespace multivariance {

// Distance functions defining the measure family. All three are isotropic:
//   euclid_power  psi(y) = |y|^alpha,            alpha in (0, 2]
//   bounded_exp   psi(y) = 1 - exp(-delta |y|^alpha), alpha in (0, 2), delta > 0
//   log_type      psi(y) = ln(1 + |y|^2 / 2)
// alpha = 2 for euclid_power is the covariance/Pearson limiting case; a zero
// measure then no longer characterizes independence (see characterizing()).
enum class psi_family { euclid_power, bounded_exp, log_type };

struct psi_spec {
    psi_family family = psi_family::euclid_power;
    double alpha = 1.0;
    double delta = 1.0;  // bounded_exp rate only

    static psi_spec euclid(double alpha) { return validated({psi_family::euclid_power, alpha, 0.0}); }
    static psi_spec bounded(double alpha, double delta) {
        return validated({psi_family::bounded_exp, alpha, delta});
    }
    static psi_spec logarithmic() { return {psi_family::log_type, 0.0, 0.0}; }

    void validate() const {
        switch (family) {
            case psi_family::euclid_power:
                if (!(alpha > 0.0) || alpha > 2.0)
                    throw usage_error("psi euclid: alpha must lie in (0, 2]");
                break;
            case psi_family::bounded_exp:
                if (!(alpha > 0.0) || alpha >= 2.0)
                    throw usage_error("psi expbnd: alpha must lie in (0, 2)");
                if (!(delta > 0.0)) throw usage_error("psi expbnd: delta must be > 0");
                break;
            case psi_family::log_type:
                break;
        }
    }

    // False only for euclid_power with alpha = 2, where a zero value does not
    // characterize independence.
    bool characterizing() const {
        return !(family == psi_family::euclid_power && alpha == 2.0);
    }

private:
    static psi_spec validated(psi_spec s) {
        s.validate();
        return s;
    }
};

namespace detail {

inline double psi_of_squared_norm(const psi_spec& spec, double sq) {
    switch (spec.family) {
        case psi_family::euclid_power:
            if (spec.alpha == 1.0) return std::sqrt(sq);
            if (spec.alpha == 2.0) return sq;
            return std::pow(sq, 0.5 * spec.alpha);
        case psi_family::bounded_exp: {
            const double r = spec.alpha == 1.0 ? std::sqrt(sq) : std::pow(sq, 0.5 * spec.alpha);
            return -std::expm1(-spec.delta * r);
        }
        case psi_family::log_type:
            return std::log1p(0.5 * sq);
    }
    return 0.0;
}

// psi(x - y) for two points given as raw pointers, no temporary vector.
inline double psi_diff(const psi_spec& spec, const double* x, const double* y, std::size_t dim) {
    double sq = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
        const double d = x[c] - y[c];
        sq += d * d;
    }
    return psi_of_squared_norm(spec, sq);
}

}  // namespace detail

inline double psi_eval(const psi_spec& spec, std::span<const double> y) {
    spec.validate();
    double sq = 0.0;
    for (double v : y) sq += v * v;
    return detail::psi_of_squared_norm(spec, sq);
}

// Textual form used by the CLI: "euclid:<alpha>", "expbnd:<alpha>:<delta>", "log".
inline psi_spec parse_psi_spec(std::string_view text) {
    auto parse_real = [&](std::string_view tok, const char* what) {
        double v = 0.0;
        const auto* first = tok.data();
        const auto* last = tok.data() + tok.size();
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc{} || res.ptr != last)
            throw usage_error(std::string("psi spec: cannot parse ") + what + " in '" +
                              std::string(text) + "'");
        return v;
    };

    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(':', start);
        if (pos == std::string_view::npos) {
            parts.push_back(text.substr(start));
            break;
        }
        parts.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }

    const std::string_view name = parts.empty() ? std::string_view{} : parts[0];
    if (name == "euclid") {
        if (parts.size() != 2) throw usage_error("psi spec: expected euclid:<alpha>");
        return psi_spec::euclid(parse_real(parts[1], "alpha"));
    }
    if (name == "expbnd") {
        if (parts.size() != 3) throw usage_error("psi spec: expected expbnd:<alpha>:<delta>");
        return psi_spec::bounded(parse_real(parts[1], "alpha"), parse_real(parts[2], "delta"));
    }
    if (name == "log") {
        if (parts.size() != 1) throw usage_error("psi spec: log takes no parameters");
        return psi_spec::logarithmic();
    }
    throw usage_error("psi spec: unknown family '" + std::string(name) +
                      "' (expected euclid, expbnd or log)");
}

// One global spec or a per-variable comma list; a single spec is broadcast.
inline std::vector<psi_spec> parse_psi_list(std::string_view text, std::size_t n_groups) {
    std::vector<psi_spec> specs;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(',', start);
        const std::string_view item =
            pos == std::string_view::npos ? text.substr(start) : text.substr(start, pos - start);
        specs.push_back(parse_psi_spec(item));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (specs.size() == 1) {
        specs.resize(n_groups, specs[0]);
    } else if (specs.size() != n_groups) {
        std::ostringstream msg;
        msg << "psi list has " << specs.size() << " entries but the data has " << n_groups
            << " variable groups";
        throw usage_error(msg.str());
    }
    return specs;
}

inline std::string to_string(const psi_spec& spec) {
    std::ostringstream out;
    switch (spec.family) {
        case psi_family::euclid_power:
            out << "euclid:" << spec.alpha;
            break;
        case psi_family::bounded_exp:
            out << "expbnd:" << spec.alpha << ":" << spec.delta;
            break;
        case psi_family::log_type:
            out << "log";
            break;
    }
    return out.str();
}

}  // namespace multivariance
