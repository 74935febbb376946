#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace multivariance {

inline constexpr const char* tool_version = "0.1.0";

// Thrown for invalid parameters, flags or call contracts (CLI exit code 1).
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown for malformed or inconsistent input data (CLI exit code 2).
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Neumaier-compensated accumulator. Measure sums run over N^2 entrywise
// products with heavy cancellation; plain summation does not reliably hit
// the 1e-10 tolerances the oracles demand.
class kahan_sum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// Dense symmetric-use square matrix, row-major.
class square_matrix {
public:
    square_matrix() = default;
    explicit square_matrix(std::size_t n, double fill = 0.0) : n_(n), v_(n * n, fill) {}

    std::size_t size() const noexcept { return n_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return v_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return v_[i * n_ + j]; }

    double* data() noexcept { return v_.data(); }
    const double* data() const noexcept { return v_.data(); }
    std::span<const double> entries() const noexcept { return v_; }
    std::span<double> entries() noexcept { return v_; }

    bool operator==(const square_matrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> v_;
};

// Runs fn(i) for i in [0, count). With workers <= 1 this is a plain loop;
// otherwise indices are split into contiguous chunks, one thread each.
// Results must be written by index so the outcome is independent of the
// worker count.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    workers = std::min(workers, count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace multivariance
