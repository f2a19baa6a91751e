#pragma once

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

#include "pixelsne/core.hpp"
#include "pixelsne/rng.hpp"

namespace pixelsne {

/// k nearest neighbors per item. Distances are always true Euclidean
/// distances; only the candidate sets may be approximate (rp backend).
/// Per-item lists are sorted by (distance, index), so ties resolve to the
/// lower index everywhere.
struct NeighborGraph {
    std::size_t k = 0;
    std::vector<std::uint32_t> ids;  // n_items * k
    std::vector<double> dists;       // n_items * k, non-decreasing per item

    std::size_t n_items() const { return k == 0 ? 0 : ids.size() / k; }
    const std::uint32_t* ids_of(std::size_t i) const { return ids.data() + i * k; }
    const double* dists_of(std::size_t i) const { return dists.data() + i * k; }
};

namespace detail {

struct Candidate {
    double d2;
    std::uint32_t id;
    bool operator<(const Candidate& o) const {
        return d2 < o.d2 || (d2 == o.d2 && id < o.id);
    }
};

// Selects the k best candidates by (distance, index) and appends them to the
// graph row in sorted order. `cands` is consumed.
inline void commit_row(std::vector<Candidate>& cands, std::size_t k, NeighborGraph& g) {
    if (cands.size() > k) {
        std::nth_element(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         cands.end());
        cands.resize(k);
    }
    std::sort(cands.begin(), cands.end());
    for (const auto& c : cands) {
        g.ids.push_back(c.id);
        g.dists.push_back(std::sqrt(c.d2));
    }
}

}  // namespace detail

/// Brute-force exact k-nearest-neighbor graph; the oracle the tree-based
/// backends are tested against.
inline NeighborGraph exact_knn(const DataMatrix& x, std::size_t k) {
    const std::size_t n = x.n_items;
    if (k < 1 || k >= n) throw std::invalid_argument("exact_knn: need 1 <= k < n_items");
    NeighborGraph g;
    g.k = k;
    g.ids.reserve(n * k);
    g.dists.reserve(n * k);
    std::vector<detail::Candidate> cands;
    for (std::size_t i = 0; i < n; ++i) {
        cands.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            cands.push_back({squared_distance(x.row(i), x.row(j), x.n_dims),
                             static_cast<std::uint32_t>(j)});
        }
        detail::commit_row(cands, k, g);
    }
    return g;
}

/// Vantage-point tree over the metric space of input rows. Queries are exact:
/// pruning uses the triangle inequality against the current k-th distance.
class VantagePointTree {
public:
    struct Node {
        std::uint32_t item;
        double radius;       // median distance from the vantage item
        std::int32_t inside;  // child with d <= radius, -1 if none
        std::int32_t outside; // child with d > radius, -1 if none
    };

    VantagePointTree(const DataMatrix& x, std::uint64_t seed) : x_(&x) {
        const std::size_t n = x.n_items;
        order_.resize(n);
        for (std::size_t i = 0; i < n; ++i) order_[i] = static_cast<std::uint32_t>(i);
        nodes_.reserve(n);
        Rng rng(seed);
        root_ = build(0, n, rng);
    }

    /// Collects the k nearest items to item `query`, excluding itself.
    void query(std::size_t query, std::size_t k, std::vector<detail::Candidate>& out) const {
        out.clear();
        double tau = std::numeric_limits<double>::infinity();
        search(root_, query, k, tau, out);
        std::sort(out.begin(), out.end());
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    std::int32_t root() const { return root_; }

private:
    std::int32_t build(std::size_t lo, std::size_t hi, Rng& rng) {
        if (lo >= hi) return -1;
        const std::size_t idx = static_cast<std::size_t>(nodes_.size());
        nodes_.push_back({});
        if (hi - lo == 1) {
            nodes_[idx] = {order_[lo], 0.0, -1, -1};
            return static_cast<std::int32_t>(idx);
        }
        const std::size_t pick = lo + rng.next_below(hi - lo);
        std::swap(order_[lo], order_[pick]);
        const std::uint32_t vantage = order_[lo];
        const double* vrow = x_->row(vantage);

        const std::size_t mid = lo + 1 + (hi - lo - 1) / 2;
        std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo + 1),
                         order_.begin() + static_cast<std::ptrdiff_t>(mid),
                         order_.begin() + static_cast<std::ptrdiff_t>(hi),
                         [&](std::uint32_t a, std::uint32_t b) {
                             const double da = squared_distance(vrow, x_->row(a), x_->n_dims);
                             const double db = squared_distance(vrow, x_->row(b), x_->n_dims);
                             return da < db || (da == db && a < b);
                         });
        const double radius = euclidean_distance(vrow, x_->row(order_[mid]), x_->n_dims);
        // Re-partition on the radius itself so inside means d <= radius and
        // outside means d > radius even when ties straddle the median.
        auto split = std::partition(order_.begin() + static_cast<std::ptrdiff_t>(lo + 1),
                                    order_.begin() + static_cast<std::ptrdiff_t>(hi),
                                    [&](std::uint32_t a) {
                                        return euclidean_distance(vrow, x_->row(a), x_->n_dims) <=
                                               radius;
                                    });
        const std::size_t cut =
            static_cast<std::size_t>(split - order_.begin());
        const std::int32_t inside = build(lo + 1, cut, rng);
        const std::int32_t outside = build(cut, hi, rng);
        nodes_[idx] = {vantage, radius, inside, outside};
        return static_cast<std::int32_t>(idx);
    }

    void search(std::int32_t node, std::size_t query, std::size_t k, double& tau,
                std::vector<detail::Candidate>& heap) const {
        if (node < 0) return;
        const Node& nd = nodes_[static_cast<std::size_t>(node)];
        const double d2 = squared_distance(x_->row(query), x_->row(nd.item), x_->n_dims);
        const double d = std::sqrt(d2);

        if (nd.item != query) {
            const detail::Candidate cand{d2, nd.item};
            if (heap.size() < k) {
                heap.push_back(cand);
                std::push_heap(heap.begin(), heap.end());
                if (heap.size() == k) tau = std::sqrt(heap.front().d2);
            } else if (cand < heap.front()) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = cand;
                std::push_heap(heap.begin(), heap.end());
                tau = std::sqrt(heap.front().d2);
            }
        }
        if (nd.inside < 0 && nd.outside < 0) return;

        if (d <= nd.radius) {
            if (d - tau <= nd.radius) search(nd.inside, query, k, tau, heap);
            if (d + tau >= nd.radius) search(nd.outside, query, k, tau, heap);
        } else {
            if (d + tau >= nd.radius) search(nd.outside, query, k, tau, heap);
            if (d - tau <= nd.radius) search(nd.inside, query, k, tau, heap);
        }
    }

    const DataMatrix* x_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

inline NeighborGraph vp_knn(const DataMatrix& x, std::size_t k, std::uint64_t seed) {
    const std::size_t n = x.n_items;
    if (k < 1 || k >= n) throw std::invalid_argument("vp_knn: need 1 <= k < n_items");
    VantagePointTree tree(x, seed);
    NeighborGraph g;
    g.k = k;
    g.ids.reserve(n * k);
    g.dists.reserve(n * k);
    std::vector<detail::Candidate> heap;
    for (std::size_t i = 0; i < n; ++i) {
        tree.query(i, k, heap);
        for (const auto& c : heap) {
            g.ids.push_back(c.id);
            g.dists.push_back(std::sqrt(c.d2));
        }
    }
    return g;
}

/// Forest of random-projection trees: recursive splits on a random unit
/// direction at the projected median, leaves capped at 2k items.
class ProjectionForest {
public:
    ProjectionForest(const DataMatrix& x, std::size_t num_trees, std::size_t leaf_max,
                     std::uint64_t seed)
        : x_(&x), leaf_max_(std::max<std::size_t>(leaf_max, 2)) {
        leaf_of_.assign(num_trees, std::vector<std::uint32_t>(x.n_items, 0));
        leaf_items_.resize(num_trees);
        for (std::size_t t = 0; t < num_trees; ++t) {
            Rng rng(Rng::derive(seed, t));
            std::vector<std::uint32_t> items(x.n_items);
            for (std::size_t i = 0; i < x.n_items; ++i) items[i] = static_cast<std::uint32_t>(i);
            build(t, std::move(items), rng);
        }
    }

    std::size_t num_trees() const { return leaf_items_.size(); }
    /// Items sharing item i's leaf in tree t (including i itself).
    const std::vector<std::uint32_t>& leaf_items(std::size_t t, std::size_t i) const {
        return leaf_items_[t][leaf_of_[t][i]];
    }

private:
    void build(std::size_t t, std::vector<std::uint32_t> items, Rng& rng) {
        if (items.size() <= leaf_max_) {
            finish_leaf(t, std::move(items));
            return;
        }
        const std::size_t d = x_->n_dims;
        std::vector<double> dir(d);
        double norm = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
            dir[a] = rng.next_gaussian();
            norm += dir[a] * dir[a];
        }
        norm = std::sqrt(norm);
        for (auto& v : dir) v /= norm;

        std::vector<double> proj(items.size());
        for (std::size_t i = 0; i < items.size(); ++i) {
            const double* r = x_->row(items[i]);
            double dot = 0.0;
            for (std::size_t a = 0; a < d; ++a) dot += r[a] * dir[a];
            proj[i] = dot;
        }
        std::vector<std::uint32_t> order(items.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
        const std::size_t mid = order.size() / 2;
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(mid),
                         order.end(), [&](std::uint32_t a, std::uint32_t b) {
                             return proj[a] < proj[b] || (proj[a] == proj[b] && a < b);
                         });
        const double offset = proj[order[mid]];

        std::vector<std::uint32_t> left, right;
        for (std::size_t i = 0; i < items.size(); ++i) {
            (proj[i] < offset ? left : right).push_back(items[i]);
        }
        if (left.empty() || right.empty()) {
            // All projections equal (duplicate-heavy data); keep as one leaf.
            finish_leaf(t, std::move(items));
            return;
        }
        build(t, std::move(left), rng);
        build(t, std::move(right), rng);
    }

    void finish_leaf(std::size_t t, std::vector<std::uint32_t> items) {
        const std::uint32_t leaf = static_cast<std::uint32_t>(leaf_items_[t].size());
        for (std::uint32_t item : items) leaf_of_[t][item] = leaf;
        leaf_items_[t].push_back(std::move(items));
    }

    const DataMatrix* x_;
    std::size_t leaf_max_;
    std::vector<std::vector<std::uint32_t>> leaf_of_;           // per tree: item -> leaf
    std::vector<std::vector<std::vector<std::uint32_t>>> leaf_items_;  // per tree: leaf -> items
};

/// Approximate KNN: random-projection-tree candidates refined by
/// neighbors-of-neighbors passes. Distances in the result are exact.
inline NeighborGraph rp_knn(const DataMatrix& x, std::size_t k, std::size_t num_trees,
                            std::size_t refine_iters, std::uint64_t seed) {
    const std::size_t n = x.n_items;
    if (k < 1 || k >= n) throw std::invalid_argument("rp_knn: need 1 <= k < n_items");
    if (num_trees < 1) throw std::invalid_argument("rp_knn: need num_trees >= 1");

    ProjectionForest forest(x, num_trees, 2 * k, seed);

    NeighborGraph g;
    g.k = k;
    g.ids.reserve(n * k);
    g.dists.reserve(n * k);

    std::vector<std::uint32_t> pool;
    std::vector<detail::Candidate> cands;
    auto select_from_pool = [&](std::size_t i) {
        std::sort(pool.begin(), pool.end());
        pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
        cands.clear();
        for (std::uint32_t j : pool) {
            if (j == i) continue;
            cands.push_back({squared_distance(x.row(i), x.row(j), x.n_dims), j});
        }
        detail::commit_row(cands, k, g);
    };

    for (std::size_t i = 0; i < n; ++i) {
        pool.clear();
        for (std::size_t t = 0; t < num_trees; ++t) {
            const auto& mates = forest.leaf_items(t, i);
            pool.insert(pool.end(), mates.begin(), mates.end());
        }
        select_from_pool(i);
        // A leaf can hold fewer than k+1 items; backfill so every row has k.
        if (g.ids.size() < (i + 1) * k) {
            pool.resize(n);
            for (std::size_t j = 0; j < n; ++j) pool[j] = static_cast<std::uint32_t>(j);
            g.ids.resize(i * k);
            g.dists.resize(i * k);
            select_from_pool(i);
        }
    }

    for (std::size_t pass = 0; pass < refine_iters; ++pass) {
        NeighborGraph next;
        next.k = k;
        next.ids.reserve(n * k);
        next.dists.reserve(n * k);
        for (std::size_t i = 0; i < n; ++i) {
            pool.clear();
            const std::uint32_t* nb = g.ids_of(i);
            for (std::size_t a = 0; a < k; ++a) {
                pool.push_back(nb[a]);
                const std::uint32_t* nn = g.ids_of(nb[a]);
                pool.insert(pool.end(), nn, nn + k);
            }
            std::sort(pool.begin(), pool.end());
            pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
            cands.clear();
            for (std::uint32_t j : pool) {
                if (j == i) continue;
                cands.push_back({squared_distance(x.row(i), x.row(j), x.n_dims), j});
            }
            detail::commit_row(cands, k, next);
        }
        g = std::move(next);
    }
    return g;
}

enum class KnnBackend { exact, vp, rp };

struct KnnOptions {
    std::size_t num_trees = 10;
    std::size_t refine_iters = 3;
};

inline NeighborGraph build_knn(const DataMatrix& x, std::size_t k, KnnBackend backend,
                               std::uint64_t seed, const KnnOptions& opts = {}) {
    switch (backend) {
        case KnnBackend::exact: return exact_knn(x, k);
        case KnnBackend::vp: return vp_knn(x, k, seed);
        case KnnBackend::rp: return rp_knn(x, k, opts.num_trees, opts.refine_iters, seed);
    }
    throw std::invalid_argument("unknown knn backend");
}

}  // namespace pixelsne
