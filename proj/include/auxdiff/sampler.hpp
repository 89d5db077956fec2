#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "auxdiff/common.hpp"
#include "auxdiff/denoiser.hpp"
#include "auxdiff/process.hpp"
#include "auxdiff/sample_batch.hpp"

namespace auxdiff {

struct SamplerConfig {
    ModelVariant variant = ModelVariant::Base;
    PredictionMode prediction = PredictionMode::Eps;
    double clip_lo = -10.0;
    double clip_hi = 10.0;
    int n_samples = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(clip_lo < clip_hi)) throw ConfigError("sampler clip range is empty");
        if (n_samples < 1) throw ConfigError("sampler needs n_samples >= 1");
        if (variant == ModelVariant::ZeroSnr && prediction == PredictionMode::Eps)
            throw ConfigError("zero_snr x eps is an unsupported combination");
    }
};

/// Ancestral reverse-process generation. Each sample owns an RNG substream;
/// the proposed variant initializes from N(xi, sigma0^2 I) with xi drawn
/// per sample, the baselines from N(0, I). Noise sigma_t = sqrt(beta_t) is
/// added at every step including t = 1, and states are clipped after each
/// transition. Chains that go non-finite are dropped and counted.
inline SampleBatch generate(const MlpParams<float>& model, const ScheduleTables& tb,
                            const XiSpec& spec, const SamplerConfig& cfg) {
    cfg.validate();
    if (model.n != spec.dim) throw ConfigError("generate: model/xi dimension mismatch");
    if (model.t_max != tb.T) throw ConfigError("generate: model t_max differs from schedule T");

    const int n = model.n;
    const int N = cfg.n_samples;
    std::vector<Rng> rngs;
    rngs.reserve(N);
    for (int j = 0; j < N; ++j)
        rngs.push_back(Rng::substream(cfg.seed, stream::sample_chain, static_cast<std::uint64_t>(j)));

    Matd states(N, n);
    std::vector<char> alive(N, 1);
    for (int j = 0; j < N; ++j) {
        if (cfg.variant == ModelVariant::Proposed) {
            auto [x_T, xi] = reverse_init(spec, tb, rngs[j]);
            for (int i = 0; i < n; ++i) states.at(j, i) = x_T[i];
        } else {
            for (int i = 0; i < n; ++i) states.at(j, i) = rngs[j].normal();
        }
    }

    std::vector<int> ts(N);
    Matd net_in(N, n);
    for (int t = tb.T; t >= 1; --t) {
        for (int j = 0; j < N; ++j) {
            ts[j] = t;
            for (int i = 0; i < n; ++i) net_in.at(j, i) = alive[j] ? states.at(j, i) : 0.0;
        }
        Mat<float> pred = forward_batch(model, net_in, ts);
        const double sigma = std::sqrt(tb.sigma_rev_sq[t]);
        Vec x(n), p(n);
        for (int j = 0; j < N; ++j) {
            if (!alive[j]) continue;
            for (int i = 0; i < n; ++i) {
                x[i] = states.at(j, i);
                p[i] = static_cast<double>(pred.at(j, i));
            }
            Vec mu = (cfg.prediction == PredictionMode::Eps) ? mu_from_eps(x, p, t, tb)
                                                             : mu_from_v(x, p, t, tb);
            bool ok = true;
            for (int i = 0; i < n; ++i) {
                double v = mu[i] + sigma * rngs[j].normal();
                v = std::min(std::max(v, cfg.clip_lo), cfg.clip_hi);
                if (!std::isfinite(v)) {
                    ok = false;
                    break;
                }
                states.at(j, i) = v;
            }
            if (!ok) alive[j] = 0;
        }
    }

    int survivors = 0;
    for (int j = 0; j < N; ++j) survivors += alive[j];
    SampleBatch out;
    out.data = Matd(survivors, n);
    int r = 0;
    for (int j = 0; j < N; ++j) {
        if (!alive[j]) continue;
        for (int i = 0; i < n; ++i) out.data.at(r, i) = states.at(j, i);
        ++r;
    }
    out.meta.source = "generated";
    out.meta.variant = to_string(cfg.variant) + "/" + to_string(cfg.prediction);
    out.meta.seed = cfg.seed;
    out.meta.steps = tb.T;
    out.meta.requested = N;
    out.meta.divergence_count = N - survivors;
    return out;
}

}  // namespace auxdiff
