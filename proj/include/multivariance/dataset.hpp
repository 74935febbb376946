#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "multivariance/common.hpp"

namespace multivariance {

// One variable group: a contiguous block of columns.
struct group_info {
    std::string name;
    std::size_t first_col = 0;
    std::size_t dim = 1;
};

// N samples of n variable groups, row-major. Groups must be disjoint,
// contiguous and cover all columns in order; all entries finite; N >= 2.
class dataset {
public:
    dataset() = default;
    dataset(std::size_t rows, std::size_t cols, std::vector<double> values,
            std::vector<group_info> groups)
        : rows_(rows), cols_(cols), values_(std::move(values)), groups_(std::move(groups)) {
        validate();
    }

    // Convenience: every column its own group.
    static dataset with_univariate_groups(std::size_t rows, std::size_t cols,
                                          std::vector<double> values) {
        std::vector<group_info> groups(cols);
        for (std::size_t c = 0; c < cols; ++c) {
            groups[c] = {"X" + std::to_string(c + 1), c, 1};
        }
        return dataset(rows, cols, std::move(values), std::move(groups));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t n_groups() const noexcept { return groups_.size(); }
    const std::vector<group_info>& groups() const noexcept { return groups_; }
    const group_info& group(std::size_t g) const { return groups_.at(g); }

    double value(std::size_t row, std::size_t col) const noexcept {
        return values_[row * cols_ + col];
    }
    double& value(std::size_t row, std::size_t col) noexcept { return values_[row * cols_ + col]; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {values_.data() + r * cols_, cols_};
    }
    // Pointer to the group's block within a row.
    const double* row_group(std::size_t r, std::size_t g) const noexcept {
        return values_.data() + r * cols_ + groups_[g].first_col;
    }
    const std::vector<double>& values() const noexcept { return values_; }

    // New dataset whose groups are the concatenated columns of the selected
    // groups, one block per entry of `parts` (each part = list of group
    // indices). Used for cluster-level tests.
    dataset regrouped(const std::vector<std::vector<std::size_t>>& parts) const {
        std::size_t out_cols = 0;
        for (const auto& part : parts)
            for (std::size_t g : part) out_cols += groups_.at(g).dim;
        std::vector<double> out(rows_ * out_cols);
        std::vector<group_info> out_groups;
        out_groups.reserve(parts.size());
        std::size_t col = 0;
        for (const auto& part : parts) {
            std::string name;
            std::size_t dim = 0;
            for (std::size_t g : part) {
                if (!name.empty()) name += "+";
                name += groups_[g].name;
                dim += groups_[g].dim;
            }
            out_groups.push_back({std::move(name), col, dim});
            for (std::size_t g : part) {
                const auto& info = groups_[g];
                for (std::size_t r = 0; r < rows_; ++r) {
                    for (std::size_t c = 0; c < info.dim; ++c) {
                        out[r * out_cols + col + c] = value(r, info.first_col + c);
                    }
                }
                col += info.dim;
            }
        }
        return dataset(rows_, out_cols, std::move(out), std::move(out_groups));
    }

private:
    void validate() const {
        if (rows_ < 2) throw data_error("dataset: at least 2 samples are required");
        if (cols_ == 0 || groups_.empty()) throw data_error("dataset: no columns");
        if (values_.size() != rows_ * cols_) throw data_error("dataset: value buffer size mismatch");
        std::size_t expect = 0;
        for (const auto& g : groups_) {
            if (g.dim == 0) throw data_error("dataset: empty group '" + g.name + "'");
            if (g.first_col != expect) {
                std::ostringstream msg;
                msg << "dataset: groups must be disjoint, contiguous and exhaustive; group '"
                    << g.name << "' starts at column " << g.first_col + 1 << ", expected "
                    << expect + 1;
                throw data_error(msg.str());
            }
            expect += g.dim;
        }
        if (expect != cols_) throw data_error("dataset: groups do not cover all columns");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                std::ostringstream msg;
                msg << "dataset: non-finite value at row " << (i / cols_) + 1 << ", column "
                    << (i % cols_) + 1;
                throw data_error(msg.str());
            }
        }
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
    std::vector<group_info> groups_;
};

}  // namespace multivariance
