#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pixelsne/affinity.hpp"
#include "pixelsne/core.hpp"
#include "pixelsne/neighbors.hpp"
#include "pixelsne/optimizer.hpp"

namespace pixelsne {

namespace detail {

inline DataMatrix coords_as_matrix(std::span<const double> coords) {
    DataMatrix m;
    m.n_items = coords.size() / 2;
    m.n_dims = 2;
    m.values.assign(coords.begin(), coords.end());
    return m;
}

}  // namespace detail

/// Fraction of each item's k high-dimensional nearest neighbors recovered
/// among its k nearest 2D neighbors, averaged over items. Both neighbor sets
/// come from exact search so the metric carries no backend approximation.
/// Sorted ks share one exact-KNN pass (smaller k sets are prefixes).
inline std::vector<double> neighborhood_precision_multi(const DataMatrix& x,
                                                        std::span<const double> coords,
                                                        const std::vector<std::size_t>& ks) {
    const std::size_t n = x.n_items;
    if (coords.size() != 2 * n)
        throw std::invalid_argument("neighborhood_precision: coordinate count mismatch");
    std::size_t kmax = 0;
    for (std::size_t k : ks) {
        if (k < 1 || k >= n)
            throw std::invalid_argument("neighborhood_precision: need 1 <= k < n_items");
        kmax = std::max(kmax, k);
    }
    const NeighborGraph high = exact_knn(x, kmax);
    const NeighborGraph low = exact_knn(detail::coords_as_matrix(coords), kmax);

    std::vector<double> out;
    out.reserve(ks.size());
    std::vector<std::uint32_t> a, b, both;
    for (std::size_t k : ks) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            a.assign(high.ids_of(i), high.ids_of(i) + k);
            b.assign(low.ids_of(i), low.ids_of(i) + k);
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            both.clear();
            std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                                  std::back_inserter(both));
            hits += both.size();
        }
        out.push_back(static_cast<double>(hits) /
                      (static_cast<double>(k) * static_cast<double>(n)));
    }
    return out;
}

inline double neighborhood_precision(const DataMatrix& x, std::span<const double> coords,
                                     std::size_t k) {
    return neighborhood_precision_multi(x, coords, {k})[0];
}

/// Leave-one-out k-NN classification accuracy in the 2D embedding. Majority
/// ties resolve to the smallest label id, where ids follow the sorted order
/// of the distinct label strings.
inline std::vector<double> knn_accuracy_multi(std::span<const double> coords,
                                              const LabelVector& labels,
                                              const std::vector<std::size_t>& ks) {
    const std::size_t n = coords.size() / 2;
    if (labels.empty()) throw std::invalid_argument("knn_accuracy: labels are required");
    if (labels.size() != n) throw std::invalid_argument("knn_accuracy: label count mismatch");
    std::size_t kmax = 0;
    for (std::size_t k : ks) {
        if (k < 1 || k >= n) throw std::invalid_argument("knn_accuracy: need 1 <= k < n_items");
        kmax = std::max(kmax, k);
    }

    std::vector<std::string> distinct(labels.begin(), labels.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::vector<std::size_t> label_id(n);
    for (std::size_t i = 0; i < n; ++i)
        label_id[i] = static_cast<std::size_t>(
            std::lower_bound(distinct.begin(), distinct.end(), labels[i]) - distinct.begin());

    const NeighborGraph low = exact_knn(detail::coords_as_matrix(coords), kmax);
    std::vector<double> out;
    out.reserve(ks.size());
    std::vector<std::size_t> votes(distinct.size());
    for (std::size_t k : ks) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(votes.begin(), votes.end(), 0);
            const std::uint32_t* nb = low.ids_of(i);
            for (std::size_t a = 0; a < k; ++a) votes[label_id[nb[a]]] += 1;
            std::size_t winner = 0;
            for (std::size_t c = 1; c < votes.size(); ++c)
                if (votes[c] > votes[winner]) winner = c;
            if (winner == label_id[i]) ++correct;
        }
        out.push_back(static_cast<double>(correct) / static_cast<double>(n));
    }
    return out;
}

inline double knn_accuracy(std::span<const double> coords, const LabelVector& labels,
                           std::size_t k) {
    return knn_accuracy_multi(coords, labels, {k})[0];
}

struct QualityReport {
    std::vector<std::size_t> ks;
    std::vector<double> precision;  // per k
    std::vector<double> accuracy;   // per k, empty when labels were absent
    double final_kl = std::numeric_limits<double>::quiet_NaN();
    double p_construction_ms = 0.0;
    double coordinate_ms = 0.0;

    std::string to_key_values() const {
        std::ostringstream os;
        for (std::size_t a = 0; a < ks.size(); ++a)
            os << "neighborhood_precision_k" << ks[a] << " = " << precision[a] << '\n';
        for (std::size_t a = 0; a < accuracy.size(); ++a)
            os << "knn_accuracy_k" << ks[a] << " = " << accuracy[a] << '\n';
        if (std::isfinite(final_kl)) os << "final_kl = " << final_kl << '\n';
        os << "p_construction_ms = " << p_construction_ms << '\n';
        os << "coordinate_ms = " << coordinate_ms << '\n';
        return os.str();
    }

    std::string to_tsv() const {
        std::ostringstream os;
        os << "metric\tk\tvalue\n";
        for (std::size_t a = 0; a < ks.size(); ++a)
            os << "neighborhood_precision\t" << ks[a] << '\t' << precision[a] << '\n';
        for (std::size_t a = 0; a < accuracy.size(); ++a)
            os << "knn_accuracy\t" << ks[a] << '\t' << accuracy[a] << '\n';
        if (std::isfinite(final_kl)) os << "final_kl\t-\t" << final_kl << '\n';
        os << "p_construction_ms\t-\t" << p_construction_ms << '\n';
        os << "coordinate_ms\t-\t" << coordinate_ms << '\n';
        return os.str();
    }
};

/// One benchmark configuration: affinity construction settings plus the
/// optimizer configuration, timed as the paper-style P / Coord / Total split.
struct BenchSpec {
    std::string name;
    KnnBackend knn = KnnBackend::vp;
    double perplexity = 50.0;
    KnnOptions knn_opts;
    OptimizerConfig opt;
};

struct BenchCell {
    double mean = 0.0;
    double stddev = 0.0;
};

struct BenchRow {
    std::string name;
    BenchCell p_construction, coordinate, total;  // milliseconds
};

struct BenchTable {
    std::size_t repeats = 0;
    std::vector<BenchRow> rows;

    std::string to_tsv() const {
        std::ostringstream os;
        os << "config\tp_mean_ms\tp_std_ms\tcoord_mean_ms\tcoord_std_ms\ttotal_mean_ms\ttotal_std_ms\n";
        for (const auto& r : rows)
            os << r.name << '\t' << r.p_construction.mean << '\t' << r.p_construction.stddev
               << '\t' << r.coordinate.mean << '\t' << r.coordinate.stddev << '\t'
               << r.total.mean << '\t' << r.total.stddev << '\n';
        return os.str();
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "timings over " << repeats << " repeat(s), milliseconds (mean +- std)\n";
        for (const auto& r : rows) {
            os << "  " << r.name << ":  P " << r.p_construction.mean << " +- "
               << r.p_construction.stddev << "  |  Coord " << r.coordinate.mean << " +- "
               << r.coordinate.stddev << "  |  Total " << r.total.mean << " +- "
               << r.total.stddev << '\n';
        }
        return os.str();
    }
};

namespace detail {

inline BenchCell summarize(const std::vector<double>& samples) {
    BenchCell cell;
    for (double v : samples) cell.mean += v;
    cell.mean /= static_cast<double>(samples.size());
    if (samples.size() > 1) {
        double acc = 0.0;
        for (double v : samples) acc += (v - cell.mean) * (v - cell.mean);
        cell.stddev = std::sqrt(acc / static_cast<double>(samples.size() - 1));
    }
    return cell;
}

}  // namespace detail

/// Wall-clock comparison of configurations. The dense backend is refused
/// above 5000 items; it exists as an oracle, not a production path.
inline BenchTable benchmark(const std::vector<BenchSpec>& specs, const DataMatrix& data,
                            std::size_t repeats) {
    if (repeats < 1) throw std::invalid_argument("benchmark: need repeats >= 1");
    using clock = std::chrono::steady_clock;
    BenchTable table;
    table.repeats = repeats;
    for (const auto& spec : specs) {
        if (spec.opt.backend == RepulsionBackend::dense && data.n_items > 5000)
            throw std::invalid_argument("benchmark: exact mode is limited to 5000 items (got " +
                                        std::to_string(data.n_items) + ")");
        std::vector<double> p_ms, coord_ms, total_ms;
        for (std::size_t rep = 0; rep < repeats; ++rep) {
            OptimizerConfig cfg = spec.opt;
            cfg.seed = spec.opt.seed + rep;

            const auto t0 = clock::now();
            SparseAffinities p =
                build_affinities(data, spec.perplexity, spec.knn, cfg.seed, spec.knn_opts,
                                 cfg.threads);
            const auto t1 = clock::now();
            EmbeddingOptimizer opt(std::move(p), cfg);
            opt.run();
            const auto t2 = clock::now();

            const double pm = std::chrono::duration<double, std::milli>(t1 - t0).count();
            const double cm = std::chrono::duration<double, std::milli>(t2 - t1).count();
            p_ms.push_back(pm);
            coord_ms.push_back(cm);
            total_ms.push_back(pm + cm);
        }
        table.rows.push_back({spec.name, detail::summarize(p_ms), detail::summarize(coord_ms),
                              detail::summarize(total_ms)});
    }
    return table;
}

}  // namespace pixelsne
