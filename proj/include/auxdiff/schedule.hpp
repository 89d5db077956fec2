#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "auxdiff/common.hpp"

namespace auxdiff {

/// Per-step variance schedule, 1-based: beta[t] for t = 1..T (beta[0] unused).
struct BetaSchedule {
    int T = 0;
    Vec beta;  // size T + 1
};

enum class GammaMode { Unset, Balanced, Custom };

/// All per-timestep coefficient tables derived from a BetaSchedule.
/// Arrays are 1-based with index 0 holding the alpha_0 = 1 sentinel;
/// nu and beta_tilde are defined for t >= 2 only. Tables are built once
/// and treated as immutable afterwards; everything is 64-bit.
struct ScheduleTables {
    int T = 0;
    double sigma0 = 1.0;
    bool zero_snr = false;
    GammaMode gamma_mode = GammaMode::Unset;

    Vec beta;          // t = 1..T
    Vec alpha;         // alpha[t] = 1 - beta[t], alpha[0] = 1
    Vec alpha_bar;     // running product, alpha_bar[0] = 1
    Vec gamma;         // xi coefficient in the forward kernel
    Vec phi;           // target-noise xi coefficient
    Vec psi;           // added-noise xi coefficient
    Vec nu;            // posterior xi coefficient, t >= 2
    Vec lambda_eps;    // ELBO weight for eps-prediction
    Vec lambda_v;      // ELBO weight for v-prediction
    Vec beta_tilde;    // posterior variance, t >= 2
    Vec sigma_rev_sq;  // reverse-step variance (= beta[t])

    void check_t(int t) const {
        if (t < 1 || t > T) throw ConfigError("timestep out of range: t=" + std::to_string(t));
    }
};

/// Noise levels log-uniform on [sigma_min, sigma_max], mapped through
/// alpha_bar = 1 / (1 + sigma^2), betas recovered from the ratio of
/// consecutive alpha_bars.
inline BetaSchedule build_log_linear_schedule(int T, double sigma_min, double sigma_max) {
    if (T < 1) throw ConfigError("schedule needs T >= 1");
    if (!(sigma_min > 0.0) || !(sigma_max >= sigma_min))
        throw ConfigError("log-linear schedule needs 0 < sigma_min <= sigma_max");

    BetaSchedule bs;
    bs.T = T;
    bs.beta.assign(static_cast<std::size_t>(T) + 1, 0.0);
    const double lmin = std::log(sigma_min);
    const double lmax = std::log(sigma_max);
    double abar_prev = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double f = (T == 1) ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        const double sigma = std::exp(lmin + f * (lmax - lmin));
        const double abar = 1.0 / (1.0 + sigma * sigma);
        bs.beta[t] = 1.0 - abar / abar_prev;
        abar_prev = abar;
        if (!(bs.beta[t] > 0.0 && bs.beta[t] < 1.0))
            throw NumericError("log-linear schedule produced beta outside (0,1)");
    }
    return bs;
}

/// Scaled-linear betas (sqrt-space linear interpolation). With the default
/// endpoints this is the SD 1.5 schedule used for qualitative checks.
inline BetaSchedule build_scaled_linear_schedule(int T, double beta_start = 0.00085,
                                                 double beta_end = 0.012) {
    if (T < 1) throw ConfigError("schedule needs T >= 1");
    if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end))
        throw ConfigError("scaled-linear schedule needs 0 < beta_start <= beta_end < 1");
    BetaSchedule bs;
    bs.T = T;
    bs.beta.assign(static_cast<std::size_t>(T) + 1, 0.0);
    const double s0 = std::sqrt(beta_start);
    const double s1 = std::sqrt(beta_end);
    for (int t = 1; t <= T; ++t) {
        const double f = (T == 1) ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        const double s = s0 + f * (s1 - s0);
        bs.beta[t] = s * s;
    }
    return bs;
}

namespace detail {

// Assumes beta/alpha/alpha_bar are in place.
inline void derive_secondary(ScheduleTables& tb) {
    const std::size_t len = static_cast<std::size_t>(tb.T) + 1;
    tb.lambda_eps.assign(len, 0.0);
    tb.lambda_v.assign(len, 0.0);
    tb.beta_tilde.assign(len, 0.0);
    tb.sigma_rev_sq.assign(len, 0.0);
    for (int t = 1; t <= tb.T; ++t) {
        tb.sigma_rev_sq[t] = tb.beta[t];
        const double a = tb.alpha[t];
        const double ab = tb.alpha_bar[t];
        const double ab_prev = tb.alpha_bar[t - 1];
        tb.lambda_eps[t] = (1.0 - a) * (1.0 - a) / (2.0 * tb.sigma_rev_sq[t] * a * (1.0 - ab));
        tb.lambda_v[t] = ab_prev * (1.0 - a) * (1.0 - a) / (2.0 * tb.sigma_rev_sq[t] * (1.0 - ab));
        if (t >= 2) tb.beta_tilde[t] = (1.0 - a) * (1.0 - ab_prev) / (1.0 - ab) * tb.sigma0 * tb.sigma0;
    }
}

inline void derive_from_beta(ScheduleTables& tb) {
    const std::size_t len = static_cast<std::size_t>(tb.T) + 1;
    tb.alpha.assign(len, 1.0);
    tb.alpha_bar.assign(len, 1.0);
    for (int t = 1; t <= tb.T; ++t) {
        tb.alpha[t] = 1.0 - tb.beta[t];
        tb.alpha_bar[t] = tb.alpha_bar[t - 1] * tb.alpha[t];
    }
    derive_secondary(tb);
}

/// phi/psi via Eq-level definitions, nu from the posterior, for whatever
/// gamma the tables currently hold.
inline void derive_phi_psi_nu(ScheduleTables& tb) {
    const std::size_t len = static_cast<std::size_t>(tb.T) + 1;
    tb.phi.assign(len, 0.0);
    tb.psi.assign(len, 0.0);
    tb.nu.assign(len, 0.0);
    double prefix = 0.0;  // sum_i gamma_i / sqrt(alpha_bar_{i-1})
    for (int t = 1; t <= tb.T; ++t) {
        const double a = tb.alpha[t];
        const double ab = tb.alpha_bar[t];
        prefix += tb.gamma[t] / std::sqrt(tb.alpha_bar[t - 1]);
        tb.phi[t] = std::sqrt(a) * std::sqrt(1.0 - ab) / (1.0 - a) * tb.gamma[t];
        tb.psi[t] = std::sqrt(ab / (1.0 - ab)) * prefix;
        if (t >= 2) {
            const double ab_prev = tb.alpha_bar[t - 1];
            tb.nu[t] = ((1.0 - a) * std::sqrt(1.0 - ab_prev) * tb.psi[t - 1] -
                        a * (1.0 - ab_prev) * tb.gamma[t]) /
                       (1.0 - ab);
        }
    }
}

}  // namespace detail

/// Builds alpha/alpha_bar/lambda/beta_tilde tables; gamma-family columns
/// stay unset until build_balanced_gamma or set_custom_gamma runs.
inline ScheduleTables derive_alpha_tables(const BetaSchedule& bs, double sigma0 = 1.0) {
    if (bs.T < 1 || bs.beta.size() != static_cast<std::size_t>(bs.T) + 1)
        throw ConfigError("invalid BetaSchedule");
    for (int t = 1; t <= bs.T; ++t)
        if (!(bs.beta[t] > 0.0 && bs.beta[t] < 1.0))
            throw ConfigError("beta out of (0,1) at t=" + std::to_string(t));
    if (!(sigma0 > 0.0)) throw ConfigError("sigma0 must be positive");

    ScheduleTables tb;
    tb.T = bs.T;
    tb.sigma0 = sigma0;
    tb.beta = bs.beta;
    detail::derive_from_beta(tb);
    const std::size_t len = static_cast<std::size_t>(tb.T) + 1;
    tb.gamma.assign(len, 0.0);
    tb.phi.assign(len, 0.0);
    tb.psi.assign(len, 0.0);
    tb.nu.assign(len, 0.0);
    return tb;
}

/// Balanced-phi,psi construction of gamma: recurse with gamma_hat_1 = 1,
/// then rescale so psi_T = 1. Guarantees phi_t = psi_t for all t and
/// nu_t = 0 for t >= 2 (up to rounding).
inline ScheduleTables build_balanced_gamma(ScheduleTables tb) {
    if (tb.alpha_bar.empty()) throw ConfigError("alpha tables not derived");
    if (tb.zero_snr)
        throw ConfigError("balanced gamma is undefined for zero-SNR tables (psi_T would be 0)");

    const std::size_t len = static_cast<std::size_t>(tb.T) + 1;
    Vec gamma_hat(len, 0.0);
    gamma_hat[1] = 1.0;
    double prefix = gamma_hat[1] / std::sqrt(tb.alpha_bar[0]);
    for (int t = 2; t <= tb.T; ++t) {
        const double ab_prev = tb.alpha_bar[t - 1];
        if (1.0 - ab_prev <= 0.0)
            throw NumericError("degenerate schedule: alpha_bar[t-1] = 1 at t=" + std::to_string(t));
        gamma_hat[t] = (1.0 - tb.alpha[t]) * std::sqrt(ab_prev) / (tb.alpha[t] * (1.0 - ab_prev)) *
                       prefix;
        prefix += gamma_hat[t] / std::sqrt(ab_prev);
    }
    const double psi_hat_T = std::sqrt(tb.alpha_bar[tb.T] / (1.0 - tb.alpha_bar[tb.T])) * prefix;
    if (!(psi_hat_T > 0.0)) throw NumericError("balanced gamma normalization failed");

    tb.gamma.assign(len, 0.0);
    for (int t = 1; t <= tb.T; ++t) tb.gamma[t] = gamma_hat[t] / psi_hat_T;
    detail::derive_phi_psi_nu(tb);
    tb.gamma_mode = GammaMode::Balanced;
    return tb;
}

/// Installs an arbitrary gamma and derives phi/psi/nu from it. Used for
/// unbalanced-schedule experiments and tests.
inline ScheduleTables set_custom_gamma(ScheduleTables tb, const Vec& gamma) {
    if (gamma.size() != static_cast<std::size_t>(tb.T) + 1)
        throw ConfigError("custom gamma must have length T+1 (index 0 unused)");
    tb.gamma = gamma;
    detail::derive_phi_psi_nu(tb);
    tb.gamma_mode = GammaMode::Custom;
    return tb;
}

/// Affine rescale of sqrt(alpha_bar) so the terminal SNR is exactly zero.
/// The result supports v-prediction only; gamma-family columns are cleared.
inline ScheduleTables zero_snr_rescale(const ScheduleTables& in) {
    if (in.alpha_bar.empty()) throw ConfigError("alpha tables not derived");
    if (in.T < 2) throw ConfigError("zero-SNR rescale needs T >= 2");

    const std::size_t len = static_cast<std::size_t>(in.T) + 1;
    const double s1 = std::sqrt(in.alpha_bar[1]);
    const double sT = std::sqrt(in.alpha_bar[in.T]);
    if (!(s1 > sT)) throw NumericError("zero-SNR rescale needs alpha_bar[1] > alpha_bar[T]");

    ScheduleTables tb;
    tb.T = in.T;
    tb.sigma0 = in.sigma0;
    tb.zero_snr = true;
    tb.beta.assign(len, 0.0);
    tb.alpha.assign(len, 1.0);
    tb.alpha_bar.assign(len, 1.0);
    for (int t = 1; t <= in.T; ++t) {
        const double s = (std::sqrt(in.alpha_bar[t]) - sT) * s1 / (s1 - sT);
        tb.alpha_bar[t] = s * s;  // exactly 0 at t = T
        tb.beta[t] = 1.0 - tb.alpha_bar[t] / tb.alpha_bar[t - 1];
        tb.alpha[t] = 1.0 - tb.beta[t];
        if (!(tb.beta[t] > 0.0 && tb.beta[t] <= 1.0))
            throw NumericError("zero-SNR rescale produced invalid beta at t=" + std::to_string(t));
    }
    detail::derive_secondary(tb);
    tb.gamma.assign(len, 0.0);
    tb.phi.assign(len, 0.0);
    tb.psi.assign(len, 0.0);
    tb.nu.assign(len, 0.0);
    tb.gamma_mode = GammaMode::Unset;
    return tb;
}

/// CSV dump of every table column (empty cells where a column is not
/// defined at that t).
inline std::string schedule_csv(const ScheduleTables& tb) {
    std::string out = "t,beta,alpha,alpha_bar,gamma,phi,psi,nu,lambda_eps,lambda_v,beta_tilde\n";
    char buf[64];
    auto cell = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out += buf;
    };
    for (int t = 1; t <= tb.T; ++t) {
        out += std::to_string(t);
        out += ',';
        cell(tb.beta[t]);
        out += ',';
        cell(tb.alpha[t]);
        out += ',';
        cell(tb.alpha_bar[t]);
        out += ',';
        if (tb.gamma_mode != GammaMode::Unset) cell(tb.gamma[t]);
        out += ',';
        if (tb.gamma_mode != GammaMode::Unset) cell(tb.phi[t]);
        out += ',';
        if (tb.gamma_mode != GammaMode::Unset) cell(tb.psi[t]);
        out += ',';
        if (tb.gamma_mode != GammaMode::Unset && t >= 2) cell(tb.nu[t]);
        out += ',';
        cell(tb.lambda_eps[t]);
        out += ',';
        cell(tb.lambda_v[t]);
        out += ',';
        if (t >= 2) cell(tb.beta_tilde[t]);
        out += '\n';
    }
    return out;
}

}  // namespace auxdiff
