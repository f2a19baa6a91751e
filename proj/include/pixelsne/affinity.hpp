#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pixelsne/core.hpp"
#include "pixelsne/neighbors.hpp"

namespace pixelsne {

/// Symmetric sparse joint-probability matrix P in CSR form. Both (i, j) and
/// (j, i) are stored with equal values; the diagonal is empty and the total
/// mass over all entries is 1.
struct SparseAffinities {
    std::size_t n_items = 0;
    std::vector<std::uint32_t> row_offsets;  // n_items + 1
    std::vector<std::uint32_t> cols;
    std::vector<double> probs;

    std::size_t entry_count() const { return cols.size(); }
    double total_mass() const {
        double s = 0.0;
        for (double p : probs) s += p;
        return s;
    }
};

/// Per-item Gaussian bandwidths and the conditional rows p(j|i) over each
/// item's k retrieved neighbors. Rows align with NeighborGraph order.
struct PerplexityCalibration {
    std::size_t k = 0;
    std::vector<double> sigmas;       // n_items
    std::vector<double> conditional;  // n_items * k, each row sums to 1
};

struct CalibratedRow {
    double sigma = 0.0;
    std::vector<double> probs;
};

namespace detail {

inline constexpr double kSigmaFloor = 1e-12;
inline constexpr double kProbFloor = 1e-12;
inline constexpr int kBisectionCap = 200;
inline constexpr double kPerplexityTol = 1e-5;

// Conditional row and perplexity for precision b = 1/(2 sigma^2) over given
// squared distances. Exponents are shifted by the smallest distance so the
// largest weight is always 1.
inline double row_for_precision(const std::vector<double>& d2, double b,
                                std::vector<double>& probs) {
    const double m = *std::min_element(d2.begin(), d2.end());
    double sum = 0.0;
    double moment = 0.0;
    for (std::size_t j = 0; j < d2.size(); ++j) {
        const double shifted = d2[j] - m;
        double w = std::exp(-b * shifted);
        if (w < kProbFloor) w = kProbFloor;
        probs[j] = w;
        sum += w;
        moment += w * shifted;
    }
    for (auto& p : probs) p /= sum;
    // H = log2(sum) + b * E[d^2 - min] / ln 2, in bits.
    const double entropy_bits = std::log2(sum) + b * (moment / sum) / 0.6931471805599453;
    return std::exp2(entropy_bits);
}

}  // namespace detail

/// Finds the Gaussian bandwidth whose conditional row over the given neighbor
/// distances has perplexity u, by bisection on sigma within [1e-20, 1e20].
inline CalibratedRow calibrate_row(std::span<const double> dists, double u) {
    const std::size_t k = dists.size();
    if (k < 1) throw std::invalid_argument("calibrate_row: need at least one distance");
    if (u >= static_cast<double>(k))
        throw std::invalid_argument("calibrate_row: perplexity must be below the neighbor count");
    if (u <= 0.0) throw std::invalid_argument("calibrate_row: perplexity must be positive");

    std::vector<double> d2(k);
    double spread = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        if (!(dists[j] >= 0.0) || !std::isfinite(dists[j]))
            throw std::invalid_argument("calibrate_row: distances must be finite and >= 0");
        d2[j] = dists[j] * dists[j];
        spread = std::max(spread, d2[j]);
    }
    spread -= *std::min_element(d2.begin(), d2.end());

    CalibratedRow out;
    out.probs.resize(k);
    if (spread == 0.0) {
        // All distances equal: the row is uniform for every sigma.
        std::fill(out.probs.begin(), out.probs.end(), 1.0 / static_cast<double>(k));
        out.sigma = detail::kSigmaFloor;
        return out;
    }

    constexpr double kSigmaLo = 1e-20, kSigmaHi = 1e20;
    auto perp_at = [&](double sigma) {
        const double b = 1.0 / (2.0 * sigma * sigma);
        return detail::row_for_precision(d2, b, out.probs);
    };

    // Perplexity is increasing in sigma. Grow a bracket by doubling/halving,
    // then bisect.
    double lo = 1.0, hi = 1.0;
    while (perp_at(hi) < u && hi < kSigmaHi) hi *= 2.0;
    while (perp_at(lo) > u && lo > kSigmaLo) lo *= 0.5;

    double sigma = std::sqrt(lo * hi);
    for (int iter = 0; iter < detail::kBisectionCap; ++iter) {
        sigma = 0.5 * (lo + hi);
        const double perp = perp_at(sigma);
        if (std::abs(perp - u) <= detail::kPerplexityTol) break;
        if (perp > u)
            hi = sigma;
        else
            lo = sigma;
    }
    perp_at(sigma);  // leave probs consistent with the returned sigma
    out.sigma = sigma;
    return out;
}

/// Calibrates every row of a neighbor graph to the target perplexity.
inline PerplexityCalibration calibrate(const NeighborGraph& g, double u, int threads = 1) {
    const std::size_t n = g.n_items();
    PerplexityCalibration cal;
    cal.k = g.k;
    cal.sigmas.resize(n);
    cal.conditional.resize(n * g.k);
    parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end, int) {
        for (std::size_t i = begin; i < end; ++i) {
            CalibratedRow row = calibrate_row({g.dists_of(i), g.k}, u);
            cal.sigmas[i] = row.sigma;
            std::copy(row.probs.begin(), row.probs.end(), cal.conditional.begin() + i * g.k);
        }
    });
    return cal;
}

/// Joint probabilities p_ij = (p(j|i) + p(i|j)) / (2n); directed entries with
/// no reverse counterpart count the missing side as zero. Output entries are
/// sorted by (row, col), so the merge is deterministic.
inline SparseAffinities symmetrize(const NeighborGraph& g, const PerplexityCalibration& cal) {
    const std::size_t n = g.n_items();
    struct Entry {
        std::uint32_t row, col;
        double p;
    };
    std::vector<Entry> entries;
    entries.reserve(2 * n * g.k);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t* ids = g.ids_of(i);
        const double* cond = cal.conditional.data() + i * g.k;
        for (std::size_t a = 0; a < g.k; ++a) {
            const auto ui = static_cast<std::uint32_t>(i);
            entries.push_back({ui, ids[a], cond[a]});
            entries.push_back({ids[a], ui, cond[a]});
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.row < b.row || (a.row == b.row && a.col < b.col);
    });

    SparseAffinities p;
    p.n_items = n;
    p.row_offsets.assign(n + 1, 0);
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    std::size_t i = 0;
    while (i < entries.size()) {
        std::size_t j = i + 1;
        double sum = entries[i].p;
        while (j < entries.size() && entries[j].row == entries[i].row &&
               entries[j].col == entries[i].col) {
            sum += entries[j].p;
            ++j;
        }
        p.cols.push_back(entries[i].col);
        p.probs.push_back(sum * scale);
        p.row_offsets[entries[i].row + 1] += 1;
        i = j;
    }
    for (std::size_t r = 0; r < n; ++r) p.row_offsets[r + 1] += p.row_offsets[r];
    return p;
}

/// Full affinity pipeline: knn with k = 3u, per-row calibration, symmetrize.
inline SparseAffinities build_affinities(const DataMatrix& x, double u, KnnBackend backend,
                                         std::uint64_t seed, const KnnOptions& opts = {},
                                         int threads = 1) {
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(3.0 * u));
    if (static_cast<double>(k) >= static_cast<double>(x.n_items))
        throw std::invalid_argument("build_affinities: need 3*perplexity < n_items");
    NeighborGraph g = build_knn(x, k, backend, seed, opts);
    PerplexityCalibration cal = calibrate(g, u, threads);
    return symmetrize(g, cal);
}

}  // namespace pixelsne
