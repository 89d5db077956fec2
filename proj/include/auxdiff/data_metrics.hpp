#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "auxdiff/assignment.hpp"
#include "auxdiff/blas.hpp"
#include "auxdiff/common.hpp"
#include "auxdiff/rng.hpp"
#include "auxdiff/sample_batch.hpp"

namespace auxdiff {

struct CylinderConfig {
    int size = 5000;
    int dim = 2;
    double r = 0.5;
    double k = 2.0;
    std::uint64_t seed = 0;

    bool operator==(const CylinderConfig&) const = default;

    void validate() const {
        if (size < 1) throw ConfigError("cylinder size must be positive");
        if (dim < 2) throw ConfigError("cylinder needs dim >= 2 (orthogonal complement of 1_n)");
        if (!(r > 0.0) || !(k > 0.0)) throw ConfigError("cylinder r and k must be positive");
    }
};

/// Cylinder dataset: x0 = u_h * k * 1_n + u_r * x_ortho with
/// u_h ~ U(-1,1), u_r ~ U(0, r * ||1_n||) and x_ortho a random unit vector
/// orthogonal to 1_n. Average brightness of each sample is exactly u_h * k.
/// When uh_out is given the per-sample u_h draws are retained for
/// cross-checks.
inline SampleBatch cylinder_dataset(const CylinderConfig& cfg, Vec* uh_out = nullptr) {
    cfg.validate();
    const int n = cfg.dim;
    const double radius = cfg.r * std::sqrt(static_cast<double>(n));
    SampleBatch batch;
    batch.data = Matd(cfg.size, n);
    batch.meta.source = "dataset";
    batch.meta.seed = cfg.seed;
    batch.meta.requested = cfg.size;
    if (uh_out) uh_out->assign(cfg.size, 0.0);

    Vec g(n);
    for (int s = 0; s < cfg.size; ++s) {
        Rng rng = Rng::substream(cfg.seed, stream::dataset, static_cast<std::uint64_t>(s));
        const double u_h = rng.uniform(-1.0, 1.0);
        const double u_r = rng.uniform(0.0, radius);
        rng.fill_normal(g.data(), n);
        double mean = std::accumulate(g.begin(), g.end(), 0.0) / n;
        double norm_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            g[i] -= mean;  // project out the 1_n component
            norm_sq += g[i] * g[i];
        }
        const double inv_norm = 1.0 / std::sqrt(norm_sq);
        double* row = batch.data.row(s);
        for (int i = 0; i < n; ++i) row[i] = u_h * cfg.k + u_r * g[i] * inv_norm;
        if (uh_out) (*uh_out)[s] = u_h;
    }
    return batch;
}

/// Per-row mean of components (the brightness proxy).
inline Vec avg_brightness(const SampleBatch& batch) {
    if (batch.data.rows == 0) throw ConfigError("avg_brightness: empty batch");
    Vec out(batch.data.rows);
    for (std::size_t r = 0; r < batch.data.rows; ++r) {
        const double* row = batch.data.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < batch.data.cols; ++c) acc += row[c];
        out[r] = acc / static_cast<double>(batch.data.cols);
    }
    return out;
}

namespace detail {

inline std::vector<std::size_t> subsample_indices(std::size_t total, std::size_t want, Rng& rng) {
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < want; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(
                                      0, static_cast<std::int64_t>(total - i) - 1));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(want);
    return idx;
}

/// Pairwise squared Euclidean distances via the Gram trick, 64-bit.
inline Matd pairwise_sq_dists(const Matd& a, const Matd& b) {
    const int ra = static_cast<int>(a.rows), rb = static_cast<int>(b.rows);
    const int d = static_cast<int>(a.cols);
    Matd dots(ra, rb);
    blas::gemm(false, true, ra, rb, d, 1.0, a.v.data(), d, b.v.data(), d, 0.0, dots.v.data(), rb);
    Vec na(ra, 0.0), nb(rb, 0.0);
    for (int i = 0; i < ra; ++i)
        for (int j = 0; j < d; ++j) na[i] += a.at(i, j) * a.at(i, j);
    for (int i = 0; i < rb; ++i)
        for (int j = 0; j < d; ++j) nb[i] += b.at(i, j) * b.at(i, j);
    for (int i = 0; i < ra; ++i)
        for (int j = 0; j < rb; ++j)
            dots.at(i, j) = std::max(0.0, na[i] + nb[j] - 2.0 * dots.at(i, j));
    return dots;
}

}  // namespace detail

/// 1-Wasserstein distance estimated by exact balanced assignment on a
/// seeded subsample (without replacement) of each side. Both sides are cut
/// to min(subsample, |A|, |B|) points; returns the mean matched Euclidean
/// distance.
inline double wasserstein1(const SampleBatch& A, const SampleBatch& B, std::size_t subsample,
                           std::uint64_t seed) {
    if (A.data.rows == 0 || B.data.rows == 0) throw ConfigError("wasserstein1: empty input");
    if (A.data.cols != B.data.cols) throw ConfigError("wasserstein1: dimension mismatch");
    const std::size_t m = std::min({subsample, A.data.rows, B.data.rows});
    // Streams are keyed by side size (not argument position) so the
    // estimator is symmetric in its arguments.
    Rng rng_a = Rng::substream(seed, stream::metric_subsample, A.data.rows);
    Rng rng_b = Rng::substream(seed, stream::metric_subsample, B.data.rows);
    const auto ia = detail::subsample_indices(A.data.rows, m, rng_a);
    const auto ib = detail::subsample_indices(B.data.rows, m, rng_b);

    Matd cost(m, m);
    const std::size_t d = A.data.cols;
    for (std::size_t i = 0; i < m; ++i) {
        const double* xa = A.data.row(ia[i]);
        for (std::size_t j = 0; j < m; ++j) {
            const double* xb = B.data.row(ib[j]);
            double sq = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = xa[c] - xb[c];
                sq += diff * diff;
            }
            cost.at(i, j) = std::sqrt(sq);
        }
    }
    const auto match = solve_assignment(cost);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) total += cost.at(i, match[i]);
    return total / static_cast<double>(m);
}

/// Brute-force 1WD over all permutations; usable for <= ~8 points.
inline double wasserstein1_bruteforce(const Matd& a, const Matd& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw ConfigError("bruteforce: shape mismatch");
    const std::size_t m = a.rows;
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double sq = 0.0;
            for (std::size_t c = 0; c < a.cols; ++c) {
                const double diff = a.at(i, c) - b.at(perm[i], c);
                sq += diff * diff;
            }
            total += std::sqrt(sq);
        }
        best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(m);
}

/// Biased (V-statistic) MMD with Gaussian kernel
/// k(x,y) = exp(-||x-y||^2 / (2 h^2)); returns sqrt(max(0, MMD^2)).
inline double mmd(const SampleBatch& A, const SampleBatch& B, double bandwidth) {
    if (A.data.rows == 0 || B.data.rows == 0) throw ConfigError("mmd: empty input");
    if (A.data.cols != B.data.cols) throw ConfigError("mmd: dimension mismatch");
    if (!(bandwidth > 0.0)) throw ConfigError("mmd: bandwidth must be positive");
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    auto kernel_mean = [&](const Matd& x, const Matd& y) {
        const Matd sq = detail::pairwise_sq_dists(x, y);
        double acc = 0.0;
        for (double v : sq.v) acc += std::exp(-v * inv);
        return acc / static_cast<double>(sq.rows * sq.cols);
    };
    const double maa = kernel_mean(A.data, A.data);
    const double mbb = kernel_mean(B.data, B.data);
    const double mab = kernel_mean(A.data, B.data);
    return std::sqrt(std::max(0.0, maa + mbb - 2.0 * mab));
}

/// Kolmogorov-Smirnov statistic of `values` against U(-k, k).
inline double ks_vs_uniform(const Vec& values, double k) {
    if (values.empty()) throw ConfigError("ks_vs_uniform: empty input");
    Vec sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double N = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double cdf = std::clamp((sorted[i] + k) / (2.0 * k), 0.0, 1.0);
        d = std::max(d, std::abs(static_cast<double>(i + 1) / N - cdf));
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / N));
    }
    return d;
}

/// Dataset scaling helpers (train on x0 / rho, rescale outputs by rho).
inline Matd scale_matrix(const Matd& m, double factor) {
    Matd out = m;
    for (double& v : out.v) v *= factor;
    return out;
}

}  // namespace auxdiff
