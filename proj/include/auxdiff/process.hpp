#pragma once

#include <cmath>
#include <utility>

#include "auxdiff/common.hpp"
#include "auxdiff/rng.hpp"
#include "auxdiff/schedule.hpp"
#include "auxdiff/xi_noise.hpp"

namespace auxdiff {

/// One forward kernel step: x_t = sqrt(alpha_t) (x_{t-1} + gamma_t xi)
///                              + sqrt(beta_t) sigma0 eps.
inline Vec forward_step(const Vec& x_prev, const Vec& xi, int t, const ScheduleTables& tb,
                        Rng& rng) {
    tb.check_t(t);
    const double sa = std::sqrt(tb.alpha[t]);
    const double sb = std::sqrt(tb.beta[t]) * tb.sigma0;
    Vec out(x_prev.size());
    for (std::size_t i = 0; i < x_prev.size(); ++i)
        out[i] = sa * (x_prev[i] + tb.gamma[t] * xi[i]) + sb * rng.normal();
    return out;
}

/// One draw from the closed-form marginal q(x_t | x_0, xi):
/// mean sqrt(abar_t) x_0 + sqrt(1-abar_t) psi_t xi, covariance (1-abar_t) sigma0^2 I.
inline Vec forward_marginal(const Vec& x0, const Vec& xi, int t, const ScheduleTables& tb,
                            Rng& rng) {
    tb.check_t(t);
    const double sab = std::sqrt(tb.alpha_bar[t]);
    const double somab = std::sqrt(1.0 - tb.alpha_bar[t]);
    Vec out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i)
        out[i] = sab * x0[i] + somab * (tb.sigma0 * rng.normal() + tb.psi[t] * xi[i]);
    return out;
}

/// Deterministic part of the marginal given the eps_0 draw; shared by the
/// training-pair builders.
inline Vec marginal_from_eps0(const Vec& x0, const Vec& eps0, const Vec& xi, int t,
                              const ScheduleTables& tb) {
    tb.check_t(t);
    const double sab = std::sqrt(tb.alpha_bar[t]);
    const double somab = std::sqrt(1.0 - tb.alpha_bar[t]);
    Vec out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i)
        out[i] = sab * x0[i] + somab * (tb.sigma0 * eps0[i] + tb.psi[t] * xi[i]);
    return out;
}

/// Tractable posterior q(x_{t-1} | x_t, x_0, xi), t >= 2. Under balanced
/// gamma the nu_t term vanishes and the mean is xi-free.
inline std::pair<Vec, double> posterior_params(const Vec& x_t, const Vec& x0, const Vec& xi, int t,
                                               const ScheduleTables& tb) {
    if (t < 2) throw ConfigError("posterior_params requires t >= 2");
    tb.check_t(t);
    const double a = tb.alpha[t];
    const double ab = tb.alpha_bar[t];
    const double ab_prev = tb.alpha_bar[t - 1];
    const double cx = std::sqrt(a) * (1.0 - ab_prev) / (1.0 - ab);
    const double c0 = (1.0 - a) * std::sqrt(ab_prev) / (1.0 - ab);
    Vec mu(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i)
        mu[i] = cx * x_t[i] + c0 * x0[i] + tb.nu[t] * xi[i];
    return {std::move(mu), tb.beta_tilde[t]};
}

/// Reverse mean from an eps prediction (requires alpha_t > 0, so it is
/// rejected on zero-SNR tables).
inline Vec mu_from_eps(const Vec& x_t, const Vec& eps_hat, int t, const ScheduleTables& tb) {
    tb.check_t(t);
    if (tb.zero_snr)
        throw ConfigError("eps-parameterization is unsupported on zero-SNR tables");
    const double a = tb.alpha[t];
    const double ab = tb.alpha_bar[t];
    const double sa = std::sqrt(a);
    const double c = (1.0 - a) / (std::sqrt(1.0 - ab) * sa);
    Vec mu(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) mu[i] = x_t[i] / sa - c * eps_hat[i];
    return mu;
}

/// Reverse mean from a velocity prediction; remains valid at alpha_t = 0.
inline Vec mu_from_v(const Vec& x_t, const Vec& v_hat, int t, const ScheduleTables& tb) {
    tb.check_t(t);
    const double a = tb.alpha[t];
    const double ab = tb.alpha_bar[t];
    const double ab_prev = tb.alpha_bar[t - 1];
    const double cx = (std::sqrt(a) * (1.0 - ab_prev) + (1.0 - a) * std::sqrt(ab_prev * ab)) /
                      (1.0 - ab);
    const double cv = (1.0 - a) * std::sqrt(ab_prev) / std::sqrt(1.0 - ab);
    Vec mu(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) mu[i] = cx * x_t[i] - cv * v_hat[i];
    return mu;
}

/// Reverse-chain initialization: xi ~ q(xi), then x_T ~ N(xi, sigma0^2 I).
/// xi is returned for diagnostics only; the chain itself never reuses it.
inline std::pair<Vec, Vec> reverse_init(const XiSpec& spec, const ScheduleTables& tb, Rng& rng) {
    Vec xi = sample_xi(spec, rng);
    Vec x_T(xi.size());
    for (std::size_t i = 0; i < xi.size(); ++i) x_T[i] = xi[i] + tb.sigma0 * rng.normal();
    return {std::move(x_T), std::move(xi)};
}

}  // namespace auxdiff
