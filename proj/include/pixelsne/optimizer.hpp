#pragma once

#include <array>
#include <cfloat>
#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pixelsne/affinity.hpp"
#include "pixelsne/core.hpp"
#include "pixelsne/quadtree.hpp"
#include "pixelsne/rng.hpp"

namespace pixelsne {

enum class RepulsionBackend { dense, data_tree, pixel_tree };

struct OptimizerConfig {
    std::size_t iterations = 1000;
    double theta = 0.5;
    double learning_rate = 200.0;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    std::size_t momentum_switch = 250;
    double exaggeration = 12.0;
    std::size_t exaggeration_iters = 250;
    double eps = 1e-6;
    RepulsionBackend backend = RepulsionBackend::pixel_tree;
    /// Pixel-aligned runs renormalize coordinates into [0, r_d) every
    /// iteration; with this off the trajectory is classic unconstrained
    /// gradient descent (the data-tree and dense backends).
    bool screen_scaling = true;
    Resolution res;
    std::uint64_t seed = 42;
    int threads = 1;
    std::size_t cost_every = 50;
    double free_init_scale = 1e-4;

    void validate() const {
        if (iterations < 1) throw std::invalid_argument("config: iterations must be >= 1");
        if (theta < 0.0) throw std::invalid_argument("config: theta must be >= 0");
        if (learning_rate <= 0.0) throw std::invalid_argument("config: learning rate must be > 0");
        if (eps <= 0.0) throw std::invalid_argument("config: eps must be > 0");
        if (backend == RepulsionBackend::pixel_tree && !screen_scaling)
            throw std::invalid_argument("config: the pixel tree requires screen scaling");
    }
};

/// 2D coordinates plus the per-axis scale state that keeps the
/// low-dimensional kernel consistent across renormalizations.
struct ScreenEmbedding {
    std::size_t n_items = 0;
    std::vector<double> coords;            // 2 * n_items, interleaved x,y
    Resolution res;
    double kernel_scale[2] = {1.0, 1.0};   // per-axis squared-scale product
    double last_span[2] = {0.0, 0.0};      // span + eps of the latest rescale
    std::size_t iteration = 0;
};

struct GradientState {
    std::vector<double> attraction;  // 2N
    std::vector<double> repulsion;   // 2N, pre-normalization sums
    std::vector<double> velocity;    // 2N
    std::vector<double> gains;       // 2N
    double z_norm = 0.0;
    std::size_t nodes_visited = 0;
};

struct CostTraceRow {
    std::size_t iteration;
    double cost;
    double tree_ms, attraction_ms, repulsion_ms, rescale_ms;  // cumulative
};

struct CostTrace {
    std::vector<CostTraceRow> rows;

    std::string to_tsv() const {
        std::ostringstream os;
        os << "iteration\tcost\ttree_ms\tattraction_ms\trepulsion_ms\trescale_ms\n";
        for (const auto& r : rows)
            os << r.iteration << '\t' << r.cost << '\t' << r.tree_ms << '\t' << r.attraction_ms
               << '\t' << r.repulsion_ms << '\t' << r.rescale_ms << '\n';
        return os.str();
    }
};

/// Maps raw coordinates onto [0, r_d) per axis: z = r * (x - min) / gamma
/// with gamma = span + eps. Returns gamma. Each axis comes out with minimum
/// exactly 0 and maximum strictly below r_d.
inline std::array<double, 2> rescale_to_screen(std::span<double> coords, Resolution res,
                                               double eps) {
    const std::size_t n = coords.size() / 2;
    if (n < 1) throw std::invalid_argument("rescale: no coordinates");
    std::array<double, 2> gamma{};
    for (int d = 0; d < 2; ++d) {
        double mn = coords[static_cast<std::size_t>(d)];
        double mx = mn;
        for (std::size_t i = 1; i < n; ++i) {
            const double v = coords[2 * i + static_cast<std::size_t>(d)];
            if (!std::isfinite(v)) throw std::invalid_argument("rescale: non-finite coordinate");
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        gamma[static_cast<std::size_t>(d)] = mx - mn + eps;
        const double limit = static_cast<double>(res[d]);
        const double scale = limit / gamma[static_cast<std::size_t>(d)];
        for (std::size_t i = 0; i < n; ++i) {
            double v = (coords[2 * i + static_cast<std::size_t>(d)] - mn) * scale;
            if (v >= limit) v = std::nextafter(limit, 0.0);  // 1-ulp rounding defense
            coords[2 * i + static_cast<std::size_t>(d)] = v;
        }
    }
    return gamma;
}

/// Accumulates the per-axis kernel scale after a rescale with span gamma:
/// scale_d *= (gamma_d / r_d)^2. With the base value 1 before the first
/// rescale, the scaled-coordinate kernel stays equal to the kernel on the
/// virtual never-rescaled trajectory.
inline void update_kernel_scale(double scale[2], const std::array<double, 2>& gamma,
                                Resolution res) {
    for (int d = 0; d < 2; ++d) {
        const double ratio = gamma[static_cast<std::size_t>(d)] / static_cast<double>(res[d]);
        scale[d] *= ratio * ratio;
    }
}

/// Draws standard-normal coordinates and immediately rescales them into the
/// screen range; the init rescale seeds the kernel-scale product.
inline ScreenEmbedding init_embedding(std::size_t n, Resolution res, std::uint64_t seed,
                                      double eps = 1e-6) {
    if (n < 2) throw std::invalid_argument("init_embedding: need at least 2 items");
    ScreenEmbedding emb;
    emb.n_items = n;
    emb.res = res;
    emb.coords.resize(2 * n);
    Rng rng(seed);
    for (auto& v : emb.coords) v = rng.next_gaussian();
    const auto gamma = rescale_to_screen(emb.coords, res, eps);
    emb.last_span[0] = gamma[0];
    emb.last_span[1] = gamma[1];
    emb.kernel_scale[0] = emb.kernel_scale[1] = 1.0;
    update_kernel_scale(emb.kernel_scale, gamma, res);
    emb.iteration = 1;
    return emb;
}

/// F_attr over the sparse entries: sum_j p_ij * K_ij^-1 * (z_i - z_j), where
/// K uses the per-axis kernel scale. Cost is linear in the entry count.
inline void attractive_forces(const SparseAffinities& p, std::span<const double> coords,
                              const double beta[2], double exaggeration, std::span<double> out,
                              int threads = 1) {
    parallel_chunks(p.n_items, threads, [&](std::size_t begin, std::size_t end, int) {
        for (std::size_t i = begin; i < end; ++i) {
            double fx = 0.0, fy = 0.0;
            const double zx = coords[2 * i];
            const double zy = coords[2 * i + 1];
            for (std::uint32_t e = p.row_offsets[i]; e < p.row_offsets[i + 1]; ++e) {
                const std::size_t j = p.cols[e];
                const double dx = zx - coords[2 * j];
                const double dy = zy - coords[2 * j + 1];
                const double kinv = detail::kernel_inverse_distance(dx, dy, beta);
                const double w = exaggeration * p.probs[e] * kinv;
                fx += w * dx;
                fy += w * dy;
            }
            out[2 * i] = fx;
            out[2 * i + 1] = fy;
        }
    });
}

/// Dense normalizer Z = sum_{k != l} K_kl^-1 over ordered pairs.
inline double dense_z_norm(std::span<const double> coords, const double beta[2]) {
    const std::size_t n = coords.size() / 2;
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = coords[2 * i] - coords[2 * j];
            const double dy = coords[2 * i + 1] - coords[2 * j + 1];
            z += detail::kernel_inverse_distance(dx, dy, beta);
        }
    return z;
}

/// KL divergence sum_{p_ij > 0} p_ij log(p_ij / q_ij) with q from the
/// scaled-coordinate kernel and the given normalizer.
inline double kl_cost_with_z(const SparseAffinities& p, std::span<const double> coords,
                             const double beta[2], double z_norm) {
    double cost = 0.0;
    for (std::size_t i = 0; i < p.n_items; ++i) {
        for (std::uint32_t e = p.row_offsets[i]; e < p.row_offsets[i + 1]; ++e) {
            const double pij = p.probs[e];
            if (pij <= 0.0) continue;
            const std::size_t j = p.cols[e];
            const double dx = coords[2 * i] - coords[2 * j];
            const double dy = coords[2 * i + 1] - coords[2 * j + 1];
            double q = detail::kernel_inverse_distance(dx, dy, beta) / z_norm;
            if (q < DBL_MIN) q = DBL_MIN;
            cost += pij * std::log(pij / q);
        }
    }
    return cost;
}

inline double kl_cost_exact(const SparseAffinities& p, std::span<const double> coords,
                            const double beta[2]) {
    return kl_cost_with_z(p, coords, beta, dense_z_norm(coords, beta));
}

/// One optimizer instance owns the affinities, the embedding, the gradient
/// state and the tree backend, and advances them one iteration per step().
class EmbeddingOptimizer {
public:
    EmbeddingOptimizer(SparseAffinities p, OptimizerConfig cfg)
        : p_(std::move(p)), cfg_(cfg) {
        cfg_.validate();
        const std::size_t n = p_.n_items;
        if (n < 2) throw std::invalid_argument("optimizer: need at least 2 items");

        if (cfg_.screen_scaling) {
            emb_ = init_embedding(n, cfg_.res, cfg_.seed, cfg_.eps);
        } else {
            emb_.n_items = n;
            emb_.res = cfg_.res;
            emb_.coords.resize(2 * n);
            Rng rng(cfg_.seed);
            for (auto& v : emb_.coords) v = rng.next_gaussian() * cfg_.free_init_scale;
            emb_.iteration = 1;
        }
        if (cfg_.backend == RepulsionBackend::pixel_tree)
            ptree_.emplace(cfg_.res[0], cfg_.res[1], cfg_.eps);

        state_.attraction.assign(2 * n, 0.0);
        state_.repulsion.assign(2 * n, 0.0);
        state_.velocity.assign(2 * n, 0.0);
        state_.gains.assign(2 * n, 1.0);
        raw_updated_ = emb_.coords;
    }

    const ScreenEmbedding& embedding() const { return emb_; }
    const GradientState& state() const { return state_; }
    const SparseAffinities& affinities() const { return p_; }
    const OptimizerConfig& config() const { return cfg_; }
    /// Updated coordinates of the last step before the screen rescale.
    std::span<const double> raw_updated() const { return raw_updated_; }
    std::size_t steps_done() const { return steps_done_; }

    struct PhaseTotals {
        double tree_ms = 0.0, attraction_ms = 0.0, repulsion_ms = 0.0, rescale_ms = 0.0;
    };
    const PhaseTotals& phase_totals() const { return phases_; }

    void step() {
        using clock = std::chrono::steady_clock;
        const std::size_t n = emb_.n_items;
        const double exag = steps_done_ < cfg_.exaggeration_iters ? cfg_.exaggeration : 1.0;
        const double momentum =
            steps_done_ < cfg_.momentum_switch ? cfg_.momentum_initial : cfg_.momentum_final;

        auto t0 = clock::now();
        refresh_occupancy();
        auto t1 = clock::now();
        compute_repulsion();
        auto t2 = clock::now();
        attractive_forces(p_, emb_.coords, emb_.kernel_scale, exag, state_.attraction,
                          cfg_.threads);
        auto t3 = clock::now();

        const double z = state_.z_norm;
        for (std::size_t c = 0; c < 2 * n; ++c) {
            const double grad = 4.0 * (state_.attraction[c] - state_.repulsion[c] / z);
            if (!std::isfinite(grad)) diverged("non-finite gradient");
            const double grad_sign = grad == 0.0 ? 0.0 : (grad < 0.0 ? -1.0 : 1.0);
            const double vel_sign =
                state_.velocity[c] == 0.0 ? 0.0 : (state_.velocity[c] < 0.0 ? -1.0 : 1.0);
            double& gain = state_.gains[c];
            gain = grad_sign != vel_sign ? gain + 0.2 : gain * 0.8;
            if (gain < 0.01) gain = 0.01;
            state_.velocity[c] = momentum * state_.velocity[c] - cfg_.learning_rate * gain * grad;
            emb_.coords[c] += state_.velocity[c];
            if (!std::isfinite(emb_.coords[c]) || std::abs(emb_.coords[c]) > 1e12)
                diverged("coordinate overflow");
        }
        auto t4 = clock::now();

        raw_updated_ = emb_.coords;
        if (cfg_.screen_scaling) {
            const auto gamma = rescale_to_screen(emb_.coords, emb_.res, cfg_.eps);
            emb_.last_span[0] = gamma[0];
            emb_.last_span[1] = gamma[1];
            update_kernel_scale(emb_.kernel_scale, gamma, emb_.res);
        } else {
            // Classic mode recenters each axis; KL is translation invariant.
            for (int d = 0; d < 2; ++d) {
                double mean = 0.0;
                for (std::size_t i = 0; i < n; ++i) mean += emb_.coords[2 * i + static_cast<std::size_t>(d)];
                mean /= static_cast<double>(n);
                for (std::size_t i = 0; i < n; ++i) emb_.coords[2 * i + static_cast<std::size_t>(d)] -= mean;
            }
        }
        auto t5 = clock::now();

        auto ms = [](auto a, auto b) {
            return std::chrono::duration<double, std::milli>(b - a).count();
        };
        phases_.tree_ms += ms(t0, t1);
        phases_.repulsion_ms += ms(t1, t2);
        phases_.attraction_ms += ms(t2, t3);
        phases_.rescale_ms += ms(t4, t5);

        ++steps_done_;
        emb_.iteration = steps_done_ + 1;
    }

    /// Runs the configured number of iterations, recording the KL cost (on
    /// the unexaggerated affinities) at the first step, every cost_every
    /// steps, and the last step.
    CostTrace run() {
        CostTrace trace;
        for (std::size_t s = 1; s <= cfg_.iterations; ++s) {
            step();
            if (s == 1 || s % cfg_.cost_every == 0 || s == cfg_.iterations) {
                trace.rows.push_back({s, kl_cost(), phases_.tree_ms, phases_.attraction_ms,
                                      phases_.repulsion_ms, phases_.rescale_ms});
            }
        }
        return trace;
    }

    /// KL cost of the current coordinates. The dense backend always computes
    /// the normalizer exactly; tree backends approximate it via traversal
    /// unless exact_z is set.
    double kl_cost(bool exact_z = false) {
        if (exact_z || cfg_.backend == RepulsionBackend::dense)
            return kl_cost_exact(p_, emb_.coords, emb_.kernel_scale);
        refresh_occupancy();
        const std::size_t n = emb_.n_items;
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = cfg_.backend == RepulsionBackend::pixel_tree
                               ? ptree_->repulsion(i, cfg_.theta, emb_.kernel_scale)
                               : dtree_.repulsion(i, cfg_.theta, emb_.kernel_scale);
            z += r.z_sum;
        }
        return kl_cost_with_z(p_, emb_.coords, emb_.kernel_scale, z);
    }

private:
    void refresh_occupancy() {
        switch (cfg_.backend) {
            case RepulsionBackend::pixel_tree: ptree_->assign(emb_.coords); break;
            case RepulsionBackend::data_tree: dtree_.build(emb_.coords, cfg_.eps); break;
            case RepulsionBackend::dense: break;
        }
    }

    void compute_repulsion() {
        const std::size_t n = emb_.n_items;
        const int threads = cfg_.threads;
        std::vector<double> z_parts(static_cast<std::size_t>(std::max(threads, 1)), 0.0);
        std::vector<std::size_t> visit_parts(z_parts.size(), 0);
        parallel_chunks(n, threads, [&](std::size_t begin, std::size_t end, int worker) {
            double z_local = 0.0;
            std::size_t visits = 0;
            for (std::size_t i = begin; i < end; ++i) {
                RepulsionResult r;
                switch (cfg_.backend) {
                    case RepulsionBackend::pixel_tree:
                        r = ptree_->repulsion(i, cfg_.theta, emb_.kernel_scale);
                        break;
                    case RepulsionBackend::data_tree:
                        r = dtree_.repulsion(i, cfg_.theta, emb_.kernel_scale);
                        break;
                    case RepulsionBackend::dense: r = dense_repulsion(i); break;
                }
                state_.repulsion[2 * i] = r.force[0];
                state_.repulsion[2 * i + 1] = r.force[1];
                z_local += r.z_sum;
                visits += r.nodes_visited;
            }
            z_parts[static_cast<std::size_t>(worker)] = z_local;
            visit_parts[static_cast<std::size_t>(worker)] = visits;
        });
        state_.z_norm = 0.0;
        state_.nodes_visited = 0;
        for (std::size_t w = 0; w < z_parts.size(); ++w) {
            state_.z_norm += z_parts[w];  // fixed order keeps runs reproducible
            state_.nodes_visited += visit_parts[w];
        }
    }

    RepulsionResult dense_repulsion(std::size_t i) const {
        RepulsionResult out;
        const std::size_t n = emb_.n_items;
        const double zx = emb_.coords[2 * i];
        const double zy = emb_.coords[2 * i + 1];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = zx - emb_.coords[2 * j];
            const double dy = zy - emb_.coords[2 * j + 1];
            const double k = detail::kernel_inverse_distance(dx, dy, emb_.kernel_scale);
            out.z_sum += k;
            out.force[0] += k * k * dx;
            out.force[1] += k * k * dy;
        }
        return out;
    }

    [[noreturn]] void diverged(const char* what) const {
        std::ostringstream os;
        os << "optimizer diverged (" << what << ") at iteration " << (steps_done_ + 1)
           << " with learning rate " << cfg_.learning_rate;
        throw std::runtime_error(os.str());
    }

    SparseAffinities p_;
    OptimizerConfig cfg_;
    ScreenEmbedding emb_;
    GradientState state_;
    DataQuadtree dtree_;
    std::optional<PixelQuadtree> ptree_;
    std::vector<double> raw_updated_;
    PhaseTotals phases_;
    std::size_t steps_done_ = 0;
};

}  // namespace pixelsne
