#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "auxdiff/blas.hpp"
#include "auxdiff/common.hpp"
#include "auxdiff/loss.hpp"
#include "auxdiff/rng.hpp"

namespace auxdiff {

inline const std::vector<int> kDefaultHidden = {256, 512, 1024, 512, 256};

/// Time-conditioned MLP weights. dims holds the full chain
/// (n + embed_dim, hidden..., n); weights are row-major (out x in).
template <typename Real>
struct MlpParams {
    int n = 0;
    int embed_dim = 0;
    int t_max = 0;
    std::vector<int> dims;
    std::vector<Mat<Real>> W;
    std::vector<std::vector<Real>> b;
    std::uint64_t seed = 0;

    std::size_t layer_count() const { return W.size(); }
    std::size_t param_count() const {
        std::size_t c = 0;
        for (std::size_t l = 0; l < W.size(); ++l) c += W[l].v.size() + b[l].size();
        return c;
    }
};

template <typename Real>
struct MlpGrads {
    std::vector<Mat<Real>> dW;
    std::vector<std::vector<Real>> db;
};

/// Sinusoidal features of tau = t / t_max with frequencies log-spaced in
/// [1, 1000]; layout (sin, cos) per frequency.
inline Vec time_embedding(int t, int t_max, int embed_dim) {
    if (embed_dim < 2 || embed_dim % 2 != 0) throw ConfigError("embed_dim must be even and >= 2");
    if (t < 0 || t > t_max) throw ConfigError("time_embedding: t out of range");
    const int half = embed_dim / 2;
    const double tau = static_cast<double>(t) / static_cast<double>(t_max);
    Vec emb(embed_dim);
    for (int k = 0; k < half; ++k) {
        const double f = (half == 1) ? 0.0 : static_cast<double>(k) / static_cast<double>(half - 1);
        const double omega = std::exp(f * std::log(1000.0));
        emb[2 * k] = std::sin(tau * omega);
        emb[2 * k + 1] = std::cos(tau * omega);
    }
    return emb;
}

/// Fan-in-scaled uniform weights, zero biases, deterministic per seed.
template <typename Real>
MlpParams<Real> init_params(int n, int embed_dim, std::uint64_t seed, int t_max = 200,
                            const std::vector<int>& hidden = kDefaultHidden) {
    if (n < 1) throw ConfigError("denoiser needs n >= 1");
    MlpParams<Real> p;
    p.n = n;
    p.embed_dim = embed_dim;
    p.t_max = t_max;
    p.seed = seed;
    p.dims.push_back(n + embed_dim);
    for (int h : hidden) p.dims.push_back(h);
    p.dims.push_back(n);
    for (std::size_t l = 0; l + 1 < p.dims.size(); ++l) {
        const int in = p.dims[l], out = p.dims[l + 1];
        Rng rng = Rng::substream(seed, stream::model_init, l);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Mat<Real> w(out, in);
        for (auto& x : w.v) x = static_cast<Real>(rng.uniform(-bound, bound));
        p.W.push_back(std::move(w));
        p.b.emplace_back(out, Real(0));
    }
    return p;
}

namespace detail {

// Branch-free expf for nonpositive arguments (2^k * e^r split, ~2 ulp).
// Underflow is handled by clamping the exponent on the integer side, which
// keeps the whole function if-convertible so activation loops vectorize.
inline float fast_expf(float x) {
    // round-to-nearest via the 2^23 + 2^22 shifter (|arg| << 2^22 here)
    const float kf = (x * 1.44269504f + 12582912.0f) - 12582912.0f;
    const float r = (x - kf * 0.693359375f) - kf * -2.12194440e-4f;
    const float p =
        1.0f + r * (1.0f + r * (0.5f + r * (0.166666667f + r * (0.0416666667f + r * 0.00833333333f))));
    const int e = static_cast<int>(kf) + 127;
    const float s = std::bit_cast<float>((e > 0 ? e : 0) << 23);
    return p * s;
}

// erf via the rational Gaussian-tail expansion (|error| < 1.5e-7, i.e.
// float precision). The double overloads below stay on std::erf; every
// oracle and gradient check runs through those.
inline float erf_fast(float x) {
    const float ax = std::fabs(x);
    const float t = 1.0f / (1.0f + 0.3275911f * ax);
    const float poly =
        t * (0.254829592f +
             t * (-0.284496736f + t * (1.421413741f + t * (-1.453152027f + t * 1.061405429f))));
    const float r = 1.0f - poly * fast_expf(-ax * ax);
    return std::copysign(r, x);
}

inline float gelu(float x) { return x * 0.5f * (1.0f + erf_fast(x * 0.70710678f)); }

inline float gelu_grad(float x) {
    const float cdf = 0.5f * (1.0f + erf_fast(x * 0.70710678f));
    const float pdf = fast_expf(-0.5f * x * x) * 0.39894228f;
    return cdf + x * pdf;
}

inline double gelu(double x) {
    return x * 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
}

inline double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865475244));
    const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
    return cdf + x * pdf;
}

}  // namespace detail

template <typename Real>
struct ForwardCache {
    Mat<Real> input;             // B x dims[0]
    std::vector<Mat<Real>> pre;  // hidden-layer pre-activations (0..L-2)
    std::vector<Mat<Real>> act;  // hidden-layer activations (0..L-2)
};

/// Batched forward pass; rows may carry different timesteps. GELU after
/// every hidden layer, linear output.
template <typename Real>
Mat<Real> forward_batch(const MlpParams<Real>& p, const Matd& X, std::span<const int> ts,
                        ForwardCache<Real>* cache = nullptr) {
    const std::size_t B = X.rows;
    if (X.cols != static_cast<std::size_t>(p.n) || ts.size() != B)
        throw ConfigError("forward_batch: shape mismatch");
    Mat<Real> in(B, p.dims[0]);
    for (std::size_t r = 0; r < B; ++r) {
        const double* xr = X.row(r);
        Real* ir = in.row(r);
        for (int i = 0; i < p.n; ++i) {
            if (!std::isfinite(xr[i])) throw NumericError("forward_batch: non-finite input");
            ir[i] = static_cast<Real>(xr[i]);
        }
        const Vec emb = time_embedding(ts[r], p.t_max, p.embed_dim);
        for (int i = 0; i < p.embed_dim; ++i) ir[p.n + i] = static_cast<Real>(emb[i]);
    }
    if (cache) {
        cache->pre.clear();
        cache->act.clear();
        cache->input = std::move(in);
    }

    Mat<Real> scratch;
    const Mat<Real>* below = cache ? &cache->input : &in;
    const std::size_t L = p.layer_count();
    for (std::size_t l = 0; l < L; ++l) {
        const int out = p.dims[l + 1], inn = p.dims[l];
        Mat<Real> y(B, out);
        blas::gemm(false, true, static_cast<int>(B), out, inn, Real(1), below->v.data(), inn,
                   p.W[l].v.data(), inn, Real(0), y.v.data(), out);
        for (std::size_t r = 0; r < B; ++r) {
            Real* yr = y.row(r);
            for (int j = 0; j < out; ++j) yr[j] += p.b[l][j];
        }
        if (l + 1 == L) return y;  // linear output layer
        if (cache) {
            cache->pre.push_back(y);
            for (auto& v : y.v) v = detail::gelu(v);
            cache->act.push_back(std::move(y));
            below = &cache->act.back();
        } else {
            for (auto& v : y.v) v = detail::gelu(v);
            scratch = std::move(y);
            below = &scratch;
        }
    }
    throw ConfigError("forward_batch: network has no layers");
}

/// Single-sample forward, written as plain loops (kept independent of the
/// GEMM path so the vectorization equivalence is actually checked).
template <typename Real>
Vec forward(const MlpParams<Real>& p, const Vec& x, int t) {
    if (x.size() != static_cast<std::size_t>(p.n)) throw ConfigError("forward: bad input size");
    std::vector<Real> cur(p.dims[0]);
    for (int i = 0; i < p.n; ++i) {
        if (!std::isfinite(x[i])) throw NumericError("forward: non-finite input");
        cur[i] = static_cast<Real>(x[i]);
    }
    const Vec emb = time_embedding(t, p.t_max, p.embed_dim);
    for (int i = 0; i < p.embed_dim; ++i) cur[p.n + i] = static_cast<Real>(emb[i]);

    const std::size_t L = p.layer_count();
    for (std::size_t l = 0; l < L; ++l) {
        const int out = p.dims[l + 1], inn = p.dims[l];
        std::vector<Real> next(out);
        for (int j = 0; j < out; ++j) {
            double acc = 0.0;
            const Real* wr = p.W[l].row(j);
            for (int i = 0; i < inn; ++i) acc += static_cast<double>(wr[i]) * cur[i];
            Real v = static_cast<Real>(acc) + p.b[l][j];
            next[j] = (l + 1 < L) ? detail::gelu(v) : v;
        }
        cur = std::move(next);
    }
    Vec out(cur.size());
    for (std::size_t i = 0; i < cur.size(); ++i) out[i] = static_cast<double>(cur[i]);
    return out;
}

/// Loss and exact reverse-mode gradients of batch_loss through the net.
/// Residuals and the loss accumulate in 64-bit regardless of Real.
template <typename Real>
std::pair<double, MlpGrads<Real>> loss_and_grad(const MlpParams<Real>& p,
                                                std::span<const TrainingPair> batch) {
    const std::size_t B = batch.size();
    if (B == 0) throw ConfigError("loss_and_grad: empty batch");
    Matd X(B, p.n);
    std::vector<int> ts(B);
    for (std::size_t r = 0; r < B; ++r) {
        if (batch[r].x_t.size() != static_cast<std::size_t>(p.n) ||
            batch[r].target.size() != static_cast<std::size_t>(p.n))
            throw ConfigError("loss_and_grad: pair dimension mismatch");
        for (int i = 0; i < p.n; ++i) X.at(r, i) = batch[r].x_t[i];
        ts[r] = batch[r].t;
    }
    ForwardCache<Real> cache;
    Mat<Real> out = forward_batch(p, X, ts, &cache);

    double loss_acc = 0.0;
    Mat<Real> d(B, p.n);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t r = 0; r < B; ++r) {
        double sq = 0.0;
        for (int i = 0; i < p.n; ++i) {
            const double res = batch[r].target[i] - static_cast<double>(out.at(r, i));
            sq += res * res;
            d.at(r, i) = static_cast<Real>(-2.0 * batch[r].weight * inv_b * res);
        }
        loss_acc += batch[r].weight * sq;
    }
    const double loss = loss_acc * inv_b;

    MlpGrads<Real> g;
    const std::size_t L = p.layer_count();
    g.dW.resize(L);
    g.db.resize(L);
    Mat<Real> dpre = std::move(d);
    for (std::size_t li = L; li-- > 0;) {
        const int out_d = p.dims[li + 1], in_d = p.dims[li];
        const Mat<Real>& below = (li == 0) ? cache.input : cache.act[li - 1];
        g.dW[li] = Mat<Real>(out_d, in_d);
        blas::gemm(true, false, out_d, in_d, static_cast<int>(B), Real(1), dpre.v.data(), out_d,
                   below.v.data(), in_d, Real(0), g.dW[li].v.data(), in_d);
        g.db[li].assign(out_d, Real(0));
        for (std::size_t r = 0; r < B; ++r) {
            const Real* dr = dpre.row(r);
            for (int j = 0; j < out_d; ++j) g.db[li][j] += dr[j];
        }
        if (li > 0) {
            Mat<Real> dact(B, in_d);
            blas::gemm(false, false, static_cast<int>(B), in_d, out_d, Real(1), dpre.v.data(),
                       out_d, p.W[li].v.data(), in_d, Real(0), dact.v.data(), in_d);
            const Mat<Real>& pre = cache.pre[li - 1];
            for (std::size_t k = 0; k < dact.v.size(); ++k)
                dact.v[k] *= detail::gelu_grad(pre.v[k]);
            dpre = std::move(dact);
        }
    }
    return {loss, std::move(g)};
}

/// Global L2 norm over every parameter gradient jointly (64-bit sum).
template <typename Real>
double grad_norm(const MlpGrads<Real>& g) {
    double sq = 0.0;
    for (const auto& m : g.dW)
        for (Real v : m.v) sq += static_cast<double>(v) * static_cast<double>(v);
    for (const auto& bv : g.db)
        for (Real v : bv) sq += static_cast<double>(v) * static_cast<double>(v);
    return std::sqrt(sq);
}

/// Scales all gradients by max_norm/||g|| when ||g|| exceeds max_norm.
/// Returns the pre-clip norm.
template <typename Real>
double clip_grad_norm(MlpGrads<Real>& g, double max_norm) {
    const double norm = grad_norm(g);
    if (norm > max_norm && norm > 0.0) {
        const Real s = static_cast<Real>(max_norm / norm);
        for (auto& m : g.dW)
            for (auto& v : m.v) v *= s;
        for (auto& bv : g.db)
            for (auto& v : bv) v *= s;
    }
    return norm;
}

template <typename Real>
struct AdamState {
    std::vector<Mat<Real>> mW, vW;
    std::vector<std::vector<Real>> mb, vb;
    long step = 0;
    long skipped = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    template <typename P>
    static AdamState init(const P& params, double lr_ = 0.001) {
        AdamState st;
        st.lr = lr_;
        for (const auto& w : params.W) st.mW.emplace_back(w.rows, w.cols), st.vW.emplace_back(w.rows, w.cols);
        for (const auto& b : params.b) st.mb.emplace_back(b.size(), Real(0)), st.vb.emplace_back(b.size(), Real(0));
        return st;
    }
};

namespace detail {
template <typename Real>
bool grads_finite(const MlpGrads<Real>& g) {
    for (const auto& m : g.dW)
        for (Real v : m.v)
            if (!std::isfinite(static_cast<double>(v))) return false;
    for (const auto& bv : g.db)
        for (Real v : bv)
            if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <typename Real>
void adam_update(Real* p, Real* m, Real* v, const Real* g, std::size_t count, double lr,
                 double b1, double b2, double eps, double bc1, double bc2) {
    const Real b1r = static_cast<Real>(b1), b2r = static_cast<Real>(b2);
    const Real c1 = static_cast<Real>(1.0 - b1), c2 = static_cast<Real>(1.0 - b2);
    const Real inv_bc1 = static_cast<Real>(1.0 / bc1), inv_bc2 = static_cast<Real>(1.0 / bc2);
    const Real lrr = static_cast<Real>(lr), epsr = static_cast<Real>(eps);
    for (std::size_t i = 0; i < count; ++i) {
        const Real gi = g[i];
        const Real mi = b1r * m[i] + c1 * gi;
        const Real vi = b2r * v[i] + c2 * gi * gi;
        m[i] = mi;
        v[i] = vi;
        p[i] -= lrr * (mi * inv_bc1) / (std::sqrt(vi * inv_bc2) + epsr);
    }
}
}  // namespace detail

/// Bias-corrected Adam step. Non-finite gradients skip the step and bump
/// the skip counter. Returns whether the step was applied.
template <typename Real>
bool adam_step(MlpParams<Real>& params, const MlpGrads<Real>& grads, AdamState<Real>& st) {
    if (!detail::grads_finite(grads)) {
        ++st.skipped;
        return false;
    }
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t l = 0; l < params.W.size(); ++l) {
        detail::adam_update(params.W[l].v.data(), st.mW[l].v.data(), st.vW[l].v.data(),
                            grads.dW[l].v.data(), params.W[l].v.size(), st.lr, st.beta1, st.beta2,
                            st.eps, bc1, bc2);
        detail::adam_update(params.b[l].data(), st.mb[l].data(), st.vb[l].data(),
                            grads.db[l].data(), params.b[l].size(), st.lr, st.beta1, st.beta2,
                            st.eps, bc1, bc2);
    }
    return true;
}

}  // namespace auxdiff
