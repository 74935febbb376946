#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "multivariance/common.hpp"
#include "multivariance/dataset.hpp"

namespace multivariance {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    for (auto& s : cells) {
        const auto first = s.find_first_not_of(" \t");
        const auto last = s.find_last_not_of(" \t");
        s = first == std::string::npos ? std::string{} : s.substr(first, last - first + 1);
    }
    return cells;
}

}  // namespace detail

// 1-based inclusive column ranges, comma separated: "x:1-2,y:3". The selected
// columns are copied into the dataset in spec order; unselected columns are
// dropped. An empty spec gives every column its own group, named from the
// header.
inline dataset ingest_csv(const std::string& path, const std::string& group_spec = {}) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw data_error(path + ": empty file (a header row is required)");
    const auto header = detail::split_csv_line(line);
    const std::size_t width = header.size();

    std::vector<double> raw;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == std::ifstream::traits_type::eof()) break;
        const auto cells = detail::split_csv_line(line);
        ++rows;
        if (cells.size() != width) {
            std::ostringstream msg;
            msg << path << ": row " << rows << " has " << cells.size() << " cells, expected "
                << width;
            throw data_error(msg.str());
        }
        for (std::size_t c = 0; c < width; ++c) {
            double v = 0.0;
            const auto& cell = cells[c];
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() ||
                !std::isfinite(v)) {
                std::ostringstream msg;
                msg << path << ": row " << rows << ", column " << c + 1 << ": cannot parse '"
                    << cell << "' as a finite number";
                throw data_error(msg.str());
            }
            raw.push_back(v);
        }
    }

    // Parse the group spec into (name, first, last) selections.
    struct selection {
        std::string name;
        std::size_t first;
        std::size_t last;
    };
    std::vector<selection> selections;
    if (group_spec.empty()) {
        for (std::size_t c = 0; c < width; ++c) {
            const std::string name = header[c].empty() ? "X" + std::to_string(c + 1) : header[c];
            selections.push_back({name, c, c});
        }
    } else {
        std::size_t start = 0;
        const std::string_view spec(group_spec);
        while (start <= spec.size()) {
            const std::size_t pos = spec.find(',', start);
            const std::string_view item =
                pos == std::string_view::npos ? spec.substr(start) : spec.substr(start, pos - start);
            const std::size_t colon = item.find(':');
            if (colon == std::string_view::npos || colon == 0)
                throw usage_error("group spec: expected name:first-last, got '" +
                                  std::string(item) + "'");
            const std::string name(item.substr(0, colon));
            const std::string_view range = item.substr(colon + 1);
            const std::size_t dash = range.find('-');
            auto parse_col = [&](std::string_view tok) {
                std::size_t v = 0;
                const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
                if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || v == 0)
                    throw usage_error("group spec: bad column index '" + std::string(tok) + "'");
                return v;
            };
            const std::size_t first = parse_col(
                dash == std::string_view::npos ? range : range.substr(0, dash));
            const std::size_t last =
                dash == std::string_view::npos ? first : parse_col(range.substr(dash + 1));
            if (last < first)
                throw usage_error("group spec: range end before start in '" + std::string(item) +
                                  "'");
            if (last > width) {
                std::ostringstream msg;
                msg << "group spec: column " << last << " exceeds the file width " << width;
                throw usage_error(msg.str());
            }
            selections.push_back({name, first - 1, last - 1});
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
        std::vector<bool> used(width, false);
        for (const auto& sel : selections) {
            for (std::size_t c = sel.first; c <= sel.last; ++c) {
                if (used[c]) {
                    std::ostringstream msg;
                    msg << "group spec: column " << c + 1 << " appears in more than one range";
                    throw usage_error(msg.str());
                }
                used[c] = true;
            }
        }
    }

    std::size_t out_cols = 0;
    for (const auto& sel : selections) out_cols += sel.last - sel.first + 1;
    std::vector<double> values(rows * out_cols);
    std::vector<group_info> groups;
    std::size_t col = 0;
    for (const auto& sel : selections) {
        const std::size_t dim = sel.last - sel.first + 1;
        groups.push_back({sel.name, col, dim});
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < dim; ++c) {
                values[r * out_cols + col + c] = raw[r * width + sel.first + c];
            }
        }
        col += dim;
    }
    return dataset(rows, out_cols, std::move(values), std::move(groups));
}

inline std::string dataset_to_csv(const dataset& data) {
    std::ostringstream out;
    out.precision(17);
    bool first = true;
    for (const auto& g : data.groups()) {
        for (std::size_t c = 0; c < g.dim; ++c) {
            if (!first) out << ",";
            first = false;
            out << g.name;
            if (g.dim > 1) out << "." << c + 1;
        }
    }
    out << "\n";
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t c = 0; c < data.cols(); ++c) {
            if (c > 0) out << ",";
            out << data.value(r, c);
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace multivariance
