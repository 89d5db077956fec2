#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "auxdiff/common.hpp"
#include "auxdiff/process.hpp"

namespace auxdiff {

/// One regression example: noised input, target noise (or velocity),
/// timestep and ELBO weight (1 for the simple losses).
struct TrainingPair {
    Vec x_t;
    Vec target;
    int t = 0;
    double weight = 1.0;
};

/// Pair for the derived loss: target sigma0 eps0 + phi_t xi, input built
/// from the closed-form marginal. With balanced gamma the noise inside
/// x_t equals the target exactly.
inline TrainingPair make_eps_pair_proposed(const Vec& x0, int t, const ScheduleTables& tb,
                                           const XiSpec& spec, Rng& rng, bool weighted = false) {
    tb.check_t(t);
    Vec eps0 = rng.normal_vec(x0.size());
    Vec xi = sample_xi(spec, rng);
    TrainingPair pair;
    pair.t = t;
    pair.weight = weighted ? tb.lambda_eps[t] : 1.0;
    pair.x_t = marginal_from_eps0(x0, eps0, xi, t, tb);
    pair.target.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i)
        pair.target[i] = tb.sigma0 * eps0[i] + tb.phi[t] * xi[i];
    return pair;
}

/// Offset-noise baseline pair: eps_c enters both the input and the target
/// with a constant coefficient of 1 (no phi/psi scaling, sigma0 fixed 1).
inline TrainingPair make_eps_pair_offset(const Vec& x0, int t, const ScheduleTables& tb,
                                         const XiSpec& spec, Rng& rng) {
    tb.check_t(t);
    Vec eps0 = rng.normal_vec(x0.size());
    Vec eps_c = sample_xi(spec, rng);
    const double sab = std::sqrt(tb.alpha_bar[t]);
    const double somab = std::sqrt(1.0 - tb.alpha_bar[t]);
    TrainingPair pair;
    pair.t = t;
    pair.x_t.resize(x0.size());
    pair.target.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        pair.target[i] = eps0[i] + eps_c[i];
        pair.x_t[i] = sab * x0[i] + somab * pair.target[i];
    }
    return pair;
}

/// Velocity target v_t = sqrt(abar_t)(sigma0 eps0 + psi_t xi) - sqrt(1-abar_t) x0.
inline Vec make_v_target(const Vec& x0, const Vec& eps0, const Vec& xi, int t,
                         const ScheduleTables& tb) {
    const double sab = std::sqrt(tb.alpha_bar[t]);
    const double somab = std::sqrt(1.0 - tb.alpha_bar[t]);
    Vec v(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i)
        v[i] = sab * (tb.sigma0 * eps0[i] + tb.psi[t] * xi[i]) - somab * x0[i];
    return v;
}

/// v-prediction pair. A nondegenerate xi requires balanced tables
/// (the derivation assumes nu_t = 0); explicitly unbalanced gamma is
/// always rejected.
inline TrainingPair make_v_pair(const Vec& x0, int t, const ScheduleTables& tb, const XiSpec& spec,
                                Rng& rng, bool weighted = false) {
    tb.check_t(t);
    if (tb.gamma_mode == GammaMode::Custom)
        throw ConfigError("v-prediction pairs require balanced gamma tables");
    if (spec.kind != XiKind::DeltaZero && tb.gamma_mode != GammaMode::Balanced)
        throw ConfigError("v-prediction with auxiliary noise requires balanced gamma tables");
    Vec eps0 = rng.normal_vec(x0.size());
    Vec xi = sample_xi(spec, rng);
    TrainingPair pair;
    pair.t = t;
    pair.weight = weighted ? tb.lambda_v[t] : 1.0;
    pair.x_t = marginal_from_eps0(x0, eps0, xi, t, tb);
    pair.target = make_v_target(x0, eps0, xi, t, tb);
    return pair;
}

/// Offset baseline under v-prediction: eps0 is replaced by eps0 + eps_c in
/// both the marginal and the velocity target, coefficient 1.
inline TrainingPair make_v_pair_offset(const Vec& x0, int t, const ScheduleTables& tb,
                                       const XiSpec& spec, Rng& rng) {
    tb.check_t(t);
    Vec eps0 = rng.normal_vec(x0.size());
    Vec eps_c = sample_xi(spec, rng);
    const double sab = std::sqrt(tb.alpha_bar[t]);
    const double somab = std::sqrt(1.0 - tb.alpha_bar[t]);
    TrainingPair pair;
    pair.t = t;
    pair.x_t.resize(x0.size());
    pair.target.resize(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const double e = eps0[i] + eps_c[i];
        pair.x_t[i] = sab * x0[i] + somab * e;
        pair.target[i] = sab * e - somab * x0[i];
    }
    return pair;
}

/// Variant/prediction dispatch used by the trainer. The timestep is drawn
/// uniformly from {1..T} out of the same substream that feeds the pair.
inline TrainingPair make_training_pair(ModelVariant variant, PredictionMode prediction,
                                       const Vec& x0, const ScheduleTables& tb, const XiSpec& spec,
                                       Rng& rng, bool weighted = false) {
    if (variant == ModelVariant::ZeroSnr && prediction == PredictionMode::Eps)
        throw ConfigError("zero_snr x eps is an unsupported combination");
    const int t = static_cast<int>(rng.uniform_int(1, tb.T));
    switch (variant) {
        case ModelVariant::Offset:
            return prediction == PredictionMode::Eps
                       ? make_eps_pair_offset(x0, t, tb, spec, rng)
                       : make_v_pair_offset(x0, t, tb, spec, rng);
        case ModelVariant::Base:
        case ModelVariant::ZeroSnr: {
            const XiSpec none = XiSpec::delta_zero(spec.dim);
            return prediction == PredictionMode::Eps
                       ? make_eps_pair_proposed(x0, t, tb, none, rng, weighted)
                       : make_v_pair(x0, t, tb, none, rng, weighted);
        }
        case ModelVariant::Proposed:
            return prediction == PredictionMode::Eps
                       ? make_eps_pair_proposed(x0, t, tb, spec, rng, weighted)
                       : make_v_pair(x0, t, tb, spec, rng, weighted);
    }
    throw ConfigError("unknown variant");
}

/// Mean over the batch of weight * ||target - prediction||^2 (sum over
/// coordinates). Sequential left-to-right accumulation in 64-bit keeps the
/// reduction order fixed.
inline double batch_loss(std::span<const TrainingPair> pairs, std::span<const Vec> predictions) {
    if (pairs.size() != predictions.size())
        throw ConfigError("batch_loss: pairs/predictions length mismatch");
    double acc = 0.0;
    for (std::size_t b = 0; b < pairs.size(); ++b) {
        if (pairs[b].target.size() != predictions[b].size())
            throw ConfigError("batch_loss: dimension mismatch");
        double sq = 0.0;
        for (std::size_t i = 0; i < predictions[b].size(); ++i) {
            const double r = pairs[b].target[i] - predictions[b][i];
            sq += r * r;
        }
        acc += pairs[b].weight * sq;
    }
    return acc / static_cast<double>(pairs.size());
}

}  // namespace auxdiff
