#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "pixelsne/core.hpp"

namespace pixelsne {

/// Half-open cell region [lo, hi) per axis.
struct CellBounds {
    double lo[2];
    double hi[2];
};

/// Per-point traversal output: the pre-normalization repulsion sums
/// (kernel^2 terms, to be divided by the global Z) and this point's
/// contribution to the Z accumulator.
struct RepulsionResult {
    double force[2] = {0.0, 0.0};
    double z_sum = 0.0;
    std::size_t nodes_visited = 0;
};

namespace detail {

// Student-t base kernel with per-axis scale compensation.
inline double kernel_inverse_distance(double dx, double dy, const double beta[2]) {
    return 1.0 / (1.0 + beta[0] * dx * dx + beta[1] * dy * dy);
}

}  // namespace detail

/// Data-driven quadtree: rebuilt from the current coordinates every
/// iteration, split until each leaf holds at most one point. Nodes keep the
/// true center of mass of their members.
class DataQuadtree {
public:
    struct Node {
        double lo[2];
        double hi[2];
        double com[2] = {0.0, 0.0};  // running mean of inserted points
        double diag = 0.0;
        std::uint32_t count = 0;
        std::uint32_t depth = 0;
        std::int32_t first_child = -1;  // four contiguous children, -1 for leaves
        std::int32_t occupant = -1;     // stored point of a singleton leaf
    };

    static constexpr std::uint32_t kMaxDepth = 64;

    /// Builds the tree from scratch. The upper root bound is padded per axis
    /// by eps times that axis' span (eps itself when the span is zero).
    void build(std::span<const double> coords, double eps) {
        n_ = coords.size() / 2;
        coords_ = coords.data();
        if (n_ == 0) throw std::invalid_argument("DataQuadtree: no points");
        for (std::size_t c = 0; c < coords.size(); ++c)
            if (!std::isfinite(coords[c]))
                throw std::invalid_argument("DataQuadtree: non-finite coordinate");

        nodes_.clear();
        max_depth_seen_ = 0;
        Node root;
        for (int d = 0; d < 2; ++d) {
            double mn = coords[static_cast<std::size_t>(d)];
            double mx = mn;
            for (std::size_t i = 1; i < n_; ++i) {
                const double v = coords[2 * i + static_cast<std::size_t>(d)];
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            const double span = mx - mn;
            root.lo[d] = mn;
            root.hi[d] = mx + (span > 0.0 ? eps * span : eps);
        }
        root.diag = diagonal(root);
        nodes_.push_back(root);
        for (std::size_t i = 0; i < n_; ++i) insert(static_cast<std::uint32_t>(i));
    }

    RepulsionResult repulsion(std::size_t i, double theta, const double beta[2]) const {
        RepulsionResult out;
        const double zx = coords_[2 * i];
        const double zy = coords_[2 * i + 1];
        visit(0, zx, zy, theta, beta, out);
        return out;
    }

    std::size_t node_count() const { return nodes_.size(); }
    std::uint32_t max_depth() const { return max_depth_seen_; }
    const Node& node(std::size_t idx) const { return nodes_[idx]; }
    std::size_t point_count() const { return n_; }

private:
    static double diagonal(const Node& nd) {
        const double wx = nd.hi[0] - nd.lo[0];
        const double wy = nd.hi[1] - nd.lo[1];
        return std::sqrt(wx * wx + wy * wy);
    }

    void insert(std::uint32_t point) {
        const double px = coords_[2 * point];
        const double py = coords_[2 * point + 1];
        std::size_t cur = 0;
        while (true) {
            Node& nd = nodes_[cur];
            nd.count += 1;
            nd.com[0] += (px - nd.com[0]) / nd.count;
            nd.com[1] += (py - nd.com[1]) / nd.count;
            max_depth_seen_ = std::max(max_depth_seen_, nd.depth);

            if (nd.first_child >= 0) {
                cur = child_for(cur, px, py);
                continue;
            }
            if (nd.count == 1) {
                nd.occupant = static_cast<std::int32_t>(point);
                return;
            }
            const std::uint32_t held = static_cast<std::uint32_t>(nd.occupant);
            const double hx = coords_[2 * held];
            const double hy = coords_[2 * held + 1];
            if ((hx == px && hy == py) || nd.depth >= kMaxDepth) {
                // Exact duplicates (or a depth-capped cell) share the leaf;
                // the count carries them and the mean stays their position.
                return;
            }
            // Everything already held sits at the occupant's exact position
            // (duplicates absorb above), so it moves down as one block.
            split(cur, nd.count - 1);
            cur = child_for(cur, px, py);
        }
    }

    void split(std::size_t idx, std::uint32_t moved_count) {
        const std::int32_t base = static_cast<std::int32_t>(nodes_.size());
        const Node parent = nodes_[idx];  // copy: push_back below may reallocate
        const double mx = 0.5 * (parent.lo[0] + parent.hi[0]);
        const double my = 0.5 * (parent.lo[1] + parent.hi[1]);
        for (int q = 0; q < 4; ++q) {
            Node child;
            child.lo[0] = (q & 1) ? mx : parent.lo[0];
            child.hi[0] = (q & 1) ? parent.hi[0] : mx;
            child.lo[1] = (q & 2) ? my : parent.lo[1];
            child.hi[1] = (q & 2) ? parent.hi[1] : my;
            child.depth = parent.depth + 1;
            child.diag = diagonal(child);
            nodes_.push_back(child);
        }
        Node& nd = nodes_[idx];
        nd.first_child = base;
        const std::uint32_t held = static_cast<std::uint32_t>(nd.occupant);
        nd.occupant = -1;
        const std::size_t dst = child_for(idx, coords_[2 * held], coords_[2 * held + 1]);
        Node& target = nodes_[dst];
        target.count = moved_count;
        target.com[0] = coords_[2 * held];
        target.com[1] = coords_[2 * held + 1];
        target.occupant = static_cast<std::int32_t>(held);
        max_depth_seen_ = std::max(max_depth_seen_, target.depth);
    }

    std::size_t child_for(std::size_t idx, double px, double py) const {
        const Node& nd = nodes_[idx];
        const double mx = 0.5 * (nd.lo[0] + nd.hi[0]);
        const double my = 0.5 * (nd.lo[1] + nd.hi[1]);
        const int q = (px >= mx ? 1 : 0) | (py >= my ? 2 : 0);
        return static_cast<std::size_t>(nd.first_child + q);
    }

    bool contains(const Node& nd, double zx, double zy) const {
        return zx >= nd.lo[0] && zx < nd.hi[0] && zy >= nd.lo[1] && zy < nd.hi[1];
    }

    void visit(std::size_t idx, double zx, double zy, double theta, const double beta[2],
               RepulsionResult& out) const {
        const Node& nd = nodes_[idx];
        if (nd.count == 0) return;
        out.nodes_visited += 1;

        const double dx = zx - nd.com[0];
        const double dy = zy - nd.com[1];
        const bool leaf = nd.first_child < 0;
        if (leaf || nd.diag * nd.diag < theta * theta * (dx * dx + dy * dy)) {
            const std::uint32_t cnt = nd.count - (contains(nd, zx, zy) ? 1u : 0u);
            if (cnt == 0) return;
            const double k = detail::kernel_inverse_distance(dx, dy, beta);
            out.z_sum += cnt * k;
            const double mult = cnt * k * k;
            out.force[0] += mult * dx;
            out.force[1] += mult * dy;
            return;
        }
        for (int q = 0; q < 4; ++q)
            visit(static_cast<std::size_t>(nd.first_child + q), zx, zy, theta, beta, out);
    }

    std::vector<Node> nodes_;
    const double* coords_ = nullptr;
    std::size_t n_ = 0;
    std::uint32_t max_depth_seen_ = 0;
};

/// Pixel-aligned quadtree: a static lattice over [0, r1) x [0, r2) built once
/// per run. Cells never get smaller than one pixel on every axis, so the
/// depth is capped by max_d floor(log2 r_d). Only the occupancy changes
/// between iterations; bounds, centers and diagonals are fixed.
///
/// The lattice is complete, so nodes are addressed arithmetically: node
/// (level, ix, iy) lives at offset[level] + (iy << level) + ix and its
/// children are ((ix << 1) | qx, (iy << 1) | qy). Power-of-two resolutions
/// locate pixels with a scaled multiply and bit shifts; other resolutions
/// descend by midpoint comparison. No division or modulo on either path.
class PixelQuadtree {
public:
    PixelQuadtree(std::uint32_t r1, std::uint32_t r2, double eps = 1e-6)
        : res_{r1, r2}, eps_(eps) {
        if (r1 < 2 || r2 < 2)
            throw std::invalid_argument("PixelQuadtree: resolutions must be >= 2");
        const int cap = std::max(floor_log2(r1), floor_log2(r2));
        int depth = 0;
        while (depth < cap && (static_cast<double>(r1) / double(1u << depth) > 1.0 ||
                               static_cast<double>(r2) / double(1u << depth) > 1.0))
            ++depth;
        levels_ = depth;

        width_[0].resize(static_cast<std::size_t>(levels_) + 2);
        width_[1].resize(static_cast<std::size_t>(levels_) + 2);
        diag_.resize(static_cast<std::size_t>(levels_) + 1);
        offset_.resize(static_cast<std::size_t>(levels_) + 2);
        inv_leaf_width_[0] = inv_leaf_width_[1] = 0.0;
        offset_[0] = 0;
        for (int l = 0; l <= levels_ + 1; ++l) {
            width_[0][static_cast<std::size_t>(l)] = static_cast<double>(r1) / double(1ull << l);
            width_[1][static_cast<std::size_t>(l)] = static_cast<double>(r2) / double(1ull << l);
        }
        for (int l = 0; l <= levels_; ++l) {
            const double wx = width_[0][static_cast<std::size_t>(l)];
            const double wy = width_[1][static_cast<std::size_t>(l)];
            diag_[static_cast<std::size_t>(l)] = std::sqrt(wx * wx + wy * wy);
            offset_[static_cast<std::size_t>(l) + 1] =
                offset_[static_cast<std::size_t>(l)] + (std::size_t{1} << (2 * l));
        }
        for (int d = 0; d < 2; ++d) {
            if ((res_[d] & (res_[d] - 1)) == 0) {
                // leaf width is 2^(log2 r - levels); its inverse is exact
                const int shift = levels_ - floor_log2(res_[d]);
                inv_leaf_width_[d] = std::ldexp(1.0, shift);
            }
        }
        counts_.assign(offset_[static_cast<std::size_t>(levels_) + 1], 0);
    }

    int depth() const { return levels_; }
    Resolution resolution() const { return res_; }
    std::size_t node_count() const { return counts_.size(); }

    CellBounds cell_bounds(int level, std::uint32_t ix, std::uint32_t iy) const {
        const std::uint32_t cells = 1u << level;
        CellBounds b;
        const std::uint32_t idx[2] = {ix, iy};
        for (int d = 0; d < 2; ++d) {
            const double w = width_[d][static_cast<std::size_t>(level)];
            b.lo[d] = idx[d] * w;
            b.hi[d] = idx[d] + 1 == cells ? static_cast<double>(res_[d]) + eps_
                                          : (idx[d] + 1) * w;
        }
        return b;
    }

    void cell_center(int level, std::uint32_t ix, std::uint32_t iy, double out[2]) const {
        const CellBounds b = cell_bounds(level, ix, iy);
        out[0] = 0.5 * (b.lo[0] + b.hi[0]);
        out[1] = 0.5 * (b.lo[1] + b.hi[1]);
    }

    double cell_diagonal(int level) const { return diag_[static_cast<std::size_t>(level)]; }

    std::uint32_t occupancy(int level, std::uint32_t ix, std::uint32_t iy) const {
        return counts_[node_index(level, ix, iy)];
    }

    /// Re-buckets all points into the static lattice. Every coordinate must
    /// already lie in [0, r_d); anything else is an optimizer bug and throws.
    void assign(std::span<const double> coords) {
        const std::size_t n = coords.size() / 2;
        coords_ = coords.data();
        for (std::size_t i = 0; i < n; ++i) {
            for (int d = 0; d < 2; ++d) {
                const double v = coords[2 * i + static_cast<std::size_t>(d)];
                if (!(v >= 0.0) || v >= static_cast<double>(res_[d]))
                    throw std::runtime_error("PixelQuadtree: coordinate " + std::to_string(v) +
                                             " of point " + std::to_string(i) +
                                             " outside [0, " + std::to_string(res_[d]) + ")");
            }
        }

        std::fill(counts_.begin(), counts_.end(), 0);
        leaf_x_.resize(n);
        leaf_y_.resize(n);
        members_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t ix = locate(0, coords[2 * i]);
            const std::uint32_t iy = locate(1, coords[2 * i + 1]);
            leaf_x_[i] = ix;
            leaf_y_[i] = iy;
            for (int l = 0; l <= levels_; ++l) {
                const int shift = levels_ - l;
                counts_[offset_[static_cast<std::size_t>(l)] +
                        (static_cast<std::size_t>(iy >> shift) << l) + (ix >> shift)] += 1;
            }
            members_[i] = {(static_cast<std::uint64_t>(iy) << levels_) | ix,
                           static_cast<std::uint32_t>(i)};
        }
        std::sort(members_.begin(), members_.end());
    }

    RepulsionResult repulsion(std::size_t i, double theta, const double beta[2]) const {
        RepulsionResult out;
        visit(0, 0, 0, i, coords_[2 * i], coords_[2 * i + 1], theta, beta, out);
        return out;
    }

    std::uint32_t leaf_of_x(std::size_t i) const { return leaf_x_[i]; }
    std::uint32_t leaf_of_y(std::size_t i) const { return leaf_y_[i]; }

private:
    struct Member {
        std::uint64_t leaf;
        std::uint32_t item;
        bool operator<(const Member& o) const {
            return leaf < o.leaf || (leaf == o.leaf && item < o.item);
        }
    };

    static int floor_log2(std::uint32_t v) {
        int l = 0;
        while (v >> (l + 1)) ++l;
        return l;
    }

    std::size_t node_index(int level, std::uint32_t ix, std::uint32_t iy) const {
        return offset_[static_cast<std::size_t>(level)] +
               (static_cast<std::size_t>(iy) << level) + ix;
    }

    // Leaf cell index of coordinate v along axis d.
    std::uint32_t locate(int d, double v) const {
        if (inv_leaf_width_[d] != 0.0)
            return static_cast<std::uint32_t>(v * inv_leaf_width_[d]);
        std::uint32_t c = 0;
        for (int l = 1; l <= levels_; ++l) {
            const double mid = (2.0 * c + 1.0) * width_[d][static_cast<std::size_t>(l)];
            c = (c << 1) | (v >= mid ? 1u : 0u);
        }
        return c;
    }

    void visit(int level, std::uint32_t ix, std::uint32_t iy, std::size_t i, double zx, double zy,
               double theta, const double beta[2], RepulsionResult& out) const {
        const std::uint32_t count = counts_[node_index(level, ix, iy)];
        if (count == 0) return;
        out.nodes_visited += 1;

        double center[2];
        cell_center(level, ix, iy, center);
        double dx = zx - center[0];
        double dy = zy - center[1];
        const bool at_leaf = level == levels_;
        const double diag = diag_[static_cast<std::size_t>(level)];
        if (at_leaf || diag * diag < theta * theta * (dx * dx + dy * dy)) {
            const int shift = levels_ - level;
            const bool inside = (leaf_x_[i] >> shift) == ix && (leaf_y_[i] >> shift) == iy;
            const std::uint32_t cnt = count - (inside ? 1u : 0u);
            if (cnt == 0) return;
            if (at_leaf && cnt == 1) {
                // A pixel holding a single foreign point contributes that
                // point exactly; summarization only kicks in for crowds.
                const std::uint32_t j = sole_foreign_member(ix, iy, static_cast<std::uint32_t>(i));
                dx = zx - coords_[2 * j];
                dy = zy - coords_[2 * j + 1];
            }
            const double k = detail::kernel_inverse_distance(dx, dy, beta);
            out.z_sum += cnt * k;
            const double mult = cnt * k * k;
            out.force[0] += mult * dx;
            out.force[1] += mult * dy;
            return;
        }
        const std::uint32_t bx = ix << 1;
        const std::uint32_t by = iy << 1;
        visit(level + 1, bx, by, i, zx, zy, theta, beta, out);
        visit(level + 1, bx | 1u, by, i, zx, zy, theta, beta, out);
        visit(level + 1, bx, by | 1u, i, zx, zy, theta, beta, out);
        visit(level + 1, bx | 1u, by | 1u, i, zx, zy, theta, beta, out);
    }

    std::uint32_t sole_foreign_member(std::uint32_t ix, std::uint32_t iy,
                                      std::uint32_t self) const {
        const std::uint64_t key = (static_cast<std::uint64_t>(iy) << levels_) | ix;
        auto it = std::lower_bound(members_.begin(), members_.end(), Member{key, 0});
        while (it != members_.end() && it->leaf == key) {
            if (it->item != self) return it->item;
            ++it;
        }
        throw std::logic_error("PixelQuadtree: occupancy/member mismatch");
    }

    Resolution res_;
    double eps_;
    int levels_ = 0;
    std::vector<double> width_[2];  // per level: cell width on each axis
    double inv_leaf_width_[2];      // nonzero only for power-of-two axes
    std::vector<double> diag_;
    std::vector<std::size_t> offset_;
    std::vector<std::uint32_t> counts_;
    std::vector<std::uint32_t> leaf_x_, leaf_y_;
    std::vector<Member> members_;
    const double* coords_ = nullptr;
};

/// Occupancy and shape statistics for debug dumps.
struct TreeStats {
    std::size_t nodes = 0;
    std::uint32_t max_depth = 0;
    std::vector<std::size_t> depth_histogram;        // nonempty nodes per depth
    std::vector<std::size_t> occupancy_histogram;    // leaves by point count
};

inline TreeStats tree_stats(const DataQuadtree& t) {
    TreeStats s;
    s.nodes = t.node_count();
    s.max_depth = t.max_depth();
    s.depth_histogram.assign(s.max_depth + 1, 0);
    for (std::size_t i = 0; i < t.node_count(); ++i) {
        const auto& nd = t.node(i);
        if (nd.count == 0) continue;
        s.depth_histogram[nd.depth] += 1;
        if (nd.first_child < 0) {
            if (s.occupancy_histogram.size() <= nd.count) s.occupancy_histogram.resize(nd.count + 1);
            s.occupancy_histogram[nd.count] += 1;
        }
    }
    return s;
}

inline TreeStats tree_stats(const PixelQuadtree& t) {
    TreeStats s;
    s.nodes = t.node_count();
    s.max_depth = static_cast<std::uint32_t>(t.depth());
    s.depth_histogram.assign(static_cast<std::size_t>(t.depth()) + 1, 0);
    for (int l = 0; l <= t.depth(); ++l) {
        const std::uint32_t cells = 1u << l;
        for (std::uint32_t iy = 0; iy < cells; ++iy)
            for (std::uint32_t ix = 0; ix < cells; ++ix) {
                const std::uint32_t c = t.occupancy(l, ix, iy);
                if (c == 0) continue;
                s.depth_histogram[static_cast<std::size_t>(l)] += 1;
                if (l == t.depth()) {
                    if (s.occupancy_histogram.size() <= c) s.occupancy_histogram.resize(c + 1);
                    s.occupancy_histogram[c] += 1;
                }
            }
    }
    return s;
}

}  // namespace pixelsne
