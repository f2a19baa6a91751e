#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "pixelsne/core.hpp"
#include "pixelsne/rng.hpp"

namespace pixelsne {
namespace detail {

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major, d x d).
// Eigenpairs are returned sorted by decreasing eigenvalue; each eigenvector's
// largest-magnitude entry is made positive so results are sign-deterministic.
inline void symmetric_eigen(std::vector<double> a, std::size_t d,
                            std::vector<double>& eigenvalues,
                            std::vector<double>& eigenvectors /* column-major */) {
    eigenvectors.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) eigenvectors[i * d + i] = 1.0;

    double frob = 0.0;
    for (double v : a) frob += v * v;
    const double stop = 1e-28 * frob;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
        if (off <= stop) break;

        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a[p * d + q];
                if (apq == 0.0) continue;
                const double app = a[p * d + p];
                const double aqq = a[q * d + q];
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t i = 0; i < d; ++i) {
                    const double aip = a[i * d + p];
                    const double aiq = a[i * d + q];
                    a[i * d + p] = c * aip - s * aiq;
                    a[i * d + q] = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double api = a[p * d + i];
                    const double aqi = a[q * d + i];
                    a[p * d + i] = c * api - s * aqi;
                    a[q * d + i] = s * api + c * aqi;
                }
                for (std::size_t i = 0; i < d; ++i) {
                    const double vip = eigenvectors[p * d + i];
                    const double viq = eigenvectors[q * d + i];
                    eigenvectors[p * d + i] = c * vip - s * viq;
                    eigenvectors[q * d + i] = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a[x * d + x] > a[y * d + y]; });

    eigenvalues.resize(d);
    std::vector<double> sorted(d * d);
    for (std::size_t j = 0; j < d; ++j) {
        const std::size_t src = order[j];
        eigenvalues[j] = a[src * d + src];
        std::size_t peak = 0;
        for (std::size_t i = 1; i < d; ++i)
            if (std::abs(eigenvectors[src * d + i]) > std::abs(eigenvectors[src * d + peak]))
                peak = i;
        const double sign = eigenvectors[src * d + peak] < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < d; ++i) sorted[j * d + i] = sign * eigenvectors[src * d + i];
    }
    eigenvectors = std::move(sorted);
}

// Orthonormalizes the m columns stored column-major in q (d x m), twice for
// numerical safety. Degenerate columns are replaced with zero.
inline void orthonormalize(std::vector<double>& q, std::size_t d, std::size_t m) {
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < m; ++j) {
            double* col = q.data() + j * d;
            for (std::size_t prev = 0; prev < j; ++prev) {
                const double* pc = q.data() + prev * d;
                double dot = 0.0;
                for (std::size_t i = 0; i < d; ++i) dot += col[i] * pc[i];
                for (std::size_t i = 0; i < d; ++i) col[i] -= dot * pc[i];
            }
            double norm = 0.0;
            for (std::size_t i = 0; i < d; ++i) norm += col[i] * col[i];
            norm = std::sqrt(norm);
            if (norm < 1e-300) {
                std::fill(col, col + d, 0.0);
            } else {
                for (std::size_t i = 0; i < d; ++i) col[i] /= norm;
            }
        }
    }
}

}  // namespace detail

/// Projects mean-centered data onto its top principal components, ordered by
/// decreasing explained variance. Uses a dense Jacobi eigendecomposition of
/// the covariance for n_dims <= 256 and randomized subspace iteration above.
inline DataMatrix pca_reduce(const DataMatrix& x, std::size_t target_dims) {
    x.validate();
    const std::size_t n = x.n_items;
    const std::size_t d = x.n_dims;
    if (target_dims < 1 || target_dims > std::min(n, d))
        throw std::invalid_argument("pca_reduce: target_dims must be in [1, min(n_items, n_dims)]");

    std::vector<double> centered(x.values);
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += centered[i * d + c];
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) centered[i * d + c] -= mean;
    }
    double total_var = 0.0;
    for (double v : centered) total_var += v * v;
    if (total_var == 0.0)
        throw std::runtime_error("pca_reduce: input has zero variance (all rows identical)");

    std::vector<double> basis;  // column-major d x target_dims
    if (d <= 256) {
        std::vector<double> cov(d * d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* r = centered.data() + i * d;
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = a; b < d; ++b) cov[a * d + b] += r[a] * r[b];
        }
        const double scale = 1.0 / static_cast<double>(n - 1);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a; b < d; ++b) {
                cov[a * d + b] *= scale;
                cov[b * d + a] = cov[a * d + b];
            }
        std::vector<double> eigenvalues, eigenvectors;
        detail::symmetric_eigen(std::move(cov), d, eigenvalues, eigenvectors);
        basis.assign(eigenvectors.begin(),
                     eigenvectors.begin() + static_cast<std::ptrdiff_t>(target_dims * d));
    } else {
        // Randomized subspace iteration: apply the covariance through the data
        // matrix so the d x d Gram matrix is never formed.
        const std::size_t m = std::min(d, target_dims + 10);
        Rng rng(Rng::derive(0x70636172616e64ULL, d + 31 * n));
        std::vector<double> q(d * m);
        for (auto& v : q) v = rng.next_gaussian();
        detail::orthonormalize(q, d, m);

        std::vector<double> proj(n * m), next(d * m);
        const double scale = 1.0 / static_cast<double>(n - 1);
        for (int iter = 0; iter < 8; ++iter) {
            for (std::size_t i = 0; i < n; ++i) {
                const double* r = centered.data() + i * d;
                for (std::size_t j = 0; j < m; ++j) {
                    const double* col = q.data() + j * d;
                    double dot = 0.0;
                    for (std::size_t a = 0; a < d; ++a) dot += r[a] * col[a];
                    proj[i * m + j] = dot;
                }
            }
            std::fill(next.begin(), next.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double* r = centered.data() + i * d;
                for (std::size_t j = 0; j < m; ++j) {
                    const double p = proj[i * m + j] * scale;
                    double* col = next.data() + j * d;
                    for (std::size_t a = 0; a < d; ++a) col[a] += p * r[a];
                }
            }
            q.swap(next);
            detail::orthonormalize(q, d, m);
        }

        // Rayleigh-Ritz on the m-dimensional subspace.
        std::vector<double> small(m * m, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* r = centered.data() + i * d;
            std::vector<double> pr(m);
            for (std::size_t j = 0; j < m; ++j) {
                const double* col = q.data() + j * d;
                double dot = 0.0;
                for (std::size_t a = 0; a < d; ++a) dot += r[a] * col[a];
                pr[j] = dot;
            }
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = a; b < m; ++b) small[a * m + b] += pr[a] * pr[b];
        }
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = a; b < m; ++b) {
                small[a * m + b] *= scale;
                small[b * m + a] = small[a * m + b];
            }
        std::vector<double> eigenvalues, eigenvectors;
        detail::symmetric_eigen(std::move(small), m, eigenvalues, eigenvectors);
        basis.assign(target_dims * d, 0.0);
        for (std::size_t j = 0; j < target_dims; ++j)
            for (std::size_t a = 0; a < d; ++a) {
                double acc = 0.0;
                for (std::size_t s = 0; s < m; ++s)
                    acc += q[s * d + a] * eigenvectors[j * m + s];
                basis[j * d + a] = acc;
            }
        // Resolve the rotation's sign per component, as in the dense path.
        for (std::size_t j = 0; j < target_dims; ++j) {
            double* col = basis.data() + j * d;
            std::size_t peak = 0;
            for (std::size_t a = 1; a < d; ++a)
                if (std::abs(col[a]) > std::abs(col[peak])) peak = a;
            if (col[peak] < 0.0)
                for (std::size_t a = 0; a < d; ++a) col[a] = -col[a];
        }
    }

    DataMatrix out;
    out.n_items = n;
    out.n_dims = target_dims;
    out.values.resize(n * target_dims);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = centered.data() + i * d;
        for (std::size_t j = 0; j < target_dims; ++j) {
            const double* col = basis.data() + j * d;
            double dot = 0.0;
            for (std::size_t a = 0; a < d; ++a) dot += r[a] * col[a];
            out.values[i * target_dims + j] = dot;
        }
    }
    return out;
}

}  // namespace pixelsne
