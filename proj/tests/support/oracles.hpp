// Independent reference implementations the library is tested against.
// Everything here is deliberately written as plain double loops, separate
// from the library's code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pixelsne/core.hpp"

namespace oracle {

// ---- brute-force KNN ------------------------------------------------------

struct Knn {
    std::size_t k;
    std::vector<std::vector<std::uint32_t>> ids;
    std::vector<std::vector<double>> dists;
};

inline Knn brute_knn(const pixelsne::DataMatrix& x, std::size_t k) {
    const std::size_t n = x.n_items;
    Knn out;
    out.k = k;
    out.ids.resize(n);
    out.dists.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::uint32_t>> all;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double d2 = 0.0;
            for (std::size_t c = 0; c < x.n_dims; ++c) {
                const double diff = x.values[i * x.n_dims + c] - x.values[j * x.n_dims + c];
                d2 += diff * diff;
            }
            all.emplace_back(d2, static_cast<std::uint32_t>(j));
        }
        std::sort(all.begin(), all.end());
        for (std::size_t a = 0; a < k; ++a) {
            out.ids[i].push_back(all[a].second);
            out.dists[i].push_back(std::sqrt(all[a].first));
        }
    }
    return out;
}

inline double recall_against(const Knn& truth, const std::uint32_t* approx_ids, std::size_t i,
                             std::size_t k) {
    std::vector<std::uint32_t> a(truth.ids[i].begin(), truth.ids[i].begin() + k);
    std::vector<std::uint32_t> b(approx_ids, approx_ids + k);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<std::uint32_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    return static_cast<double>(both.size()) / static_cast<double>(k);
}

// ---- perplexity calibration -----------------------------------------------

// High-resolution bisection on sigma down to a 1e-12 relative bracket.
struct CalRow {
    double sigma;
    std::vector<double> probs;
};

inline double row_perplexity(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0) h -= p * std::log2(p);
    return std::exp2(h);
}

inline std::vector<double> gaussian_row(const std::vector<double>& dists, double sigma) {
    std::vector<double> p(dists.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < dists.size(); ++j) {
        p[j] = std::exp(-dists[j] * dists[j] / (2.0 * sigma * sigma));
        sum += p[j];
    }
    for (auto& v : p) v /= sum;
    return p;
}

inline CalRow calibrate_row_highres(const std::vector<double>& dists, double u) {
    double lo = 1e-12, hi = 1e12;
    while ((hi - lo) / hi > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (row_perplexity(gaussian_row(dists, mid)) < u)
            lo = mid;
        else
            hi = mid;
    }
    const double sigma = 0.5 * (lo + hi);
    return {sigma, gaussian_row(dists, sigma)};
}

// Dense joint P over all pairs (the small-N affinity oracle).
inline std::vector<double> dense_joint_p(const pixelsne::DataMatrix& x, double u) {
    const std::size_t n = x.n_items;
    std::vector<double> cond(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> dists;
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d2 = 0.0;
            for (std::size_t c = 0; c < x.n_dims; ++c) {
                const double diff = x.values[i * x.n_dims + c] - x.values[j * x.n_dims + c];
                d2 += diff * diff;
            }
            dists.push_back(std::sqrt(d2));
            others.push_back(j);
        }
        const CalRow row = calibrate_row_highres(dists, u);
        for (std::size_t a = 0; a < others.size(); ++a) cond[i * n + others[a]] = row.probs[a];
    }
    std::vector<double> joint(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) joint[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n);
    return joint;
}

// ---- dense repulsion / Z / KL ---------------------------------------------

struct DenseForces {
    std::vector<double> rep;  // 2N pre-normalization sums
    double z = 0.0;
};

inline double kernel(double dx, double dy, const double beta[2]) {
    return 1.0 / (1.0 + beta[0] * dx * dx + beta[1] * dy * dy);
}

inline DenseForces dense_repulsion(std::span<const double> coords, const double beta[2]) {
    const std::size_t n = coords.size() / 2;
    DenseForces out;
    out.rep.assign(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = coords[2 * i] - coords[2 * j];
            const double dy = coords[2 * i + 1] - coords[2 * j + 1];
            const double k = kernel(dx, dy, beta);
            out.z += k;
            out.rep[2 * i] += k * k * dx;
            out.rep[2 * i + 1] += k * k * dy;
        }
    return out;
}

inline std::vector<double> dense_attraction(const std::vector<double>& joint_p,
                                            std::span<const double> coords,
                                            const double beta[2]) {
    const std::size_t n = coords.size() / 2;
    std::vector<double> attr(2 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dx = coords[2 * i] - coords[2 * j];
            const double dy = coords[2 * i + 1] - coords[2 * j + 1];
            const double w = joint_p[i * n + j] * kernel(dx, dy, beta);
            attr[2 * i] += w * dx;
            attr[2 * i + 1] += w * dy;
        }
    return attr;
}

inline double dense_kl(const std::vector<double>& joint_p, std::span<const double> coords,
                       const double beta[2]) {
    const std::size_t n = coords.size() / 2;
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            z += kernel(coords[2 * i] - coords[2 * j], coords[2 * i + 1] - coords[2 * j + 1],
                        beta);
        }
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double p = joint_p[i * n + j];
            if (p <= 0) continue;
            const double q =
                kernel(coords[2 * i] - coords[2 * j], coords[2 * i + 1] - coords[2 * j + 1],
                       beta) /
                z;
            cost += p * std::log(p / q);
        }
    return cost;
}

// Analytic dense t-SNE gradient of the KL objective (beta-weighted kernel,
// gradient taken per the 4*(F_attr - F_rep/Z) assembly).
inline std::vector<double> dense_gradient(const std::vector<double>& joint_p,
                                          std::span<const double> coords, const double beta[2]) {
    const std::size_t n = coords.size() / 2;
    const DenseForces rep = dense_repulsion(coords, beta);
    const std::vector<double> attr = dense_attraction(joint_p, coords, beta);
    std::vector<double> grad(2 * n);
    for (std::size_t c = 0; c < 2 * n; ++c) grad[c] = 4.0 * (attr[c] - rep.rep[c] / rep.z);
    return grad;
}

// One full reference update step (gains + momentum) on dense forces,
// matching the reference descent rules; returns the updated coordinates.
struct StepState {
    std::vector<double> velocity, gains;
};

inline std::vector<double> dense_step(const std::vector<double>& joint_p,
                                      std::span<const double> coords, const double beta[2],
                                      double exaggeration, double eta, double momentum,
                                      StepState& st) {
    const std::size_t n = coords.size() / 2;
    if (st.velocity.empty()) {
        st.velocity.assign(2 * n, 0.0);
        st.gains.assign(2 * n, 1.0);
    }
    const DenseForces rep = dense_repulsion(coords, beta);
    std::vector<double> p_ex(joint_p);
    for (auto& v : p_ex) v *= exaggeration;
    const std::vector<double> attr = dense_attraction(p_ex, coords, beta);
    std::vector<double> out(coords.begin(), coords.end());
    for (std::size_t c = 0; c < 2 * n; ++c) {
        const double grad = 4.0 * (attr[c] - rep.rep[c] / rep.z);
        const double gs = grad == 0.0 ? 0.0 : (grad < 0.0 ? -1.0 : 1.0);
        const double vs = st.velocity[c] == 0.0 ? 0.0 : (st.velocity[c] < 0.0 ? -1.0 : 1.0);
        st.gains[c] = gs != vs ? st.gains[c] + 0.2 : st.gains[c] * 0.8;
        if (st.gains[c] < 0.01) st.gains[c] = 0.01;
        st.velocity[c] = momentum * st.velocity[c] - eta * st.gains[c] * grad;
        out[c] += st.velocity[c];
    }
    return out;
}

// ---- misc -----------------------------------------------------------------

// Minimal XML well-formedness scan: tag nesting, attribute quoting, one root.
inline bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    int roots = 0;
    if (text.rfind("<?xml", 0) == 0) {
        i = text.find("?>");
        if (i == std::string::npos) return false;
        i += 2;
    }
    while (i < text.size()) {
        const char c = text[i];
        if (c != '<') {
            if (c == '>') return false;
            ++i;
            continue;
        }
        std::size_t close = i + 1;
        bool in_quote = false;
        char quote = 0;
        for (; close < text.size(); ++close) {
            if (in_quote) {
                if (text[close] == quote) in_quote = false;
            } else if (text[close] == '"' || text[close] == '\'') {
                in_quote = true;
                quote = text[close];
            } else if (text[close] == '>') {
                break;
            } else if (text[close] == '<') {
                return false;
            }
        }
        if (close >= text.size() || in_quote) return false;
        std::string tag = text.substr(i + 1, close - i - 1);
        if (tag.empty()) return false;
        if (tag[0] == '/') {
            const std::string name = tag.substr(1);
            if (stack.empty() || stack.back() != name) return false;
            stack.pop_back();
            if (stack.empty()) ++roots;
        } else if (tag.back() == '/') {
            if (stack.empty()) ++roots;
        } else if (tag[0] != '!' && tag[0] != '?') {
            std::size_t sp = tag.find_first_of(" \t\n");
            stack.push_back(sp == std::string::npos ? tag : tag.substr(0, sp));
        }
        i = close + 1;
    }
    return stack.empty() && roots == 1;
}

}  // namespace oracle
