#pragma once

#include <cmath>
#include <string>

#include "auxdiff/common.hpp"
#include "auxdiff/rng.hpp"

namespace auxdiff {

enum class XiKind { DeltaZero, CorrelatedGaussian };

/// Auxiliary-noise distribution q(xi). CorrelatedGaussian has the rank-one
/// covariance sigma_c^2 * 1_{n x n} (every component identical per draw);
/// DeltaZero is the reduction to a standard diffusion model.
struct XiSpec {
    XiKind kind = XiKind::DeltaZero;
    double sigma_c_sq = 0.0;
    int dim = 1;

    static XiSpec delta_zero(int n) { return XiSpec{XiKind::DeltaZero, 0.0, n}; }
    static XiSpec correlated_gaussian(int n, double sigma_c_sq) {
        if (sigma_c_sq < 0.0) throw ConfigError("xi.sigma_c_sq must be nonnegative");
        return XiSpec{XiKind::CorrelatedGaussian, sigma_c_sq, n};
    }
};

inline std::string to_string(XiKind k) {
    return k == XiKind::DeltaZero ? "delta_zero" : "correlated_gaussian";
}

inline XiKind xi_kind_from_string(const std::string& s) {
    if (s == "delta_zero") return XiKind::DeltaZero;
    if (s == "correlated_gaussian") return XiKind::CorrelatedGaussian;
    throw ConfigError("unknown xi kind: " + s);
}

/// One draw from q(xi). The rank-one covariance means a single scalar
/// normal suffices: xi = z * sigma_c * 1_n. DeltaZero consumes no
/// randomness, which the bitwise DDPM-reduction checks rely on.
inline Vec sample_xi(const XiSpec& spec, Rng& rng) {
    if (spec.kind == XiKind::DeltaZero) return Vec(spec.dim, 0.0);
    const double z = rng.normal() * std::sqrt(spec.sigma_c_sq);
    return Vec(spec.dim, z);
}

}  // namespace auxdiff
