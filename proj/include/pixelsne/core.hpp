#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pixelsne {

inline constexpr const char* kVersion = "0.1.0";

/// Dense row-major matrix of input feature vectors, one item per row.
struct DataMatrix {
    std::size_t n_items = 0;
    std::size_t n_dims = 0;
    std::vector<double> values;  // n_items * n_dims, row-major

    double* row(std::size_t i) { return values.data() + i * n_dims; }
    const double* row(std::size_t i) const { return values.data() + i * n_dims; }

    /// Checks shape and finiteness; throws std::invalid_argument on violation.
    void validate() const {
        if (n_items < 2) throw std::invalid_argument("DataMatrix: need at least 2 items");
        if (n_dims < 1) throw std::invalid_argument("DataMatrix: need at least 1 dimension");
        if (values.size() != n_items * n_dims)
            throw std::invalid_argument("DataMatrix: value buffer does not match shape");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!std::isfinite(values[i]))
                throw std::invalid_argument("DataMatrix: non-finite value at row " +
                                            std::to_string(i / n_dims));
        }
    }
};

/// One categorical label per item; may be absent.
using LabelVector = std::vector<std::string>;

/// Target screen resolution in pixels, per axis.
struct Resolution {
    std::uint32_t r[2] = {512, 512};

    std::uint32_t operator[](int d) const { return r[d]; }
    bool operator==(const Resolution&) const = default;
};

inline double squared_distance(const double* a, const double* b, std::size_t dims) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
        double diff = a[d] - b[d];
        acc += diff * diff;  // single multiply, never pow()
    }
    return acc;
}

inline double euclidean_distance(const double* a, const double* b, std::size_t dims) {
    return std::sqrt(squared_distance(a, b, dims));
}

/// Runs fn(begin, end, worker) over [0, n) split into contiguous chunks.
/// With threads <= 1 the call is direct; results that are combined in
/// worker-index order stay deterministic for a fixed thread count.
template <typename Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        fn(std::size_t{0}, n, 0);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end, w] { fn(begin, end, static_cast<int>(w)); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace pixelsne
