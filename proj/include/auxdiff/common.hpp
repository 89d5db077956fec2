#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace auxdiff {

using Vec = std::vector<double>;

/// Dense row-major matrix.
template <typename Real>
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Real> v;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, Real fill = Real(0)) : rows(r), cols(c), v(r * c, fill) {}

    Real* row(std::size_t i) { return v.data() + i * cols; }
    const Real* row(std::size_t i) const { return v.data() + i * cols; }
    Real& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    Real at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

using Matd = Mat<double>;
using Matf = Mat<float>;

// Error taxonomy, mapped to CLI exit codes (config 2, numeric 3, io 4).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ModelVariant { Base, Offset, ZeroSnr, Proposed };
enum class PredictionMode { Eps, V };

inline std::string to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::Base: return "base";
        case ModelVariant::Offset: return "offset";
        case ModelVariant::ZeroSnr: return "zero_snr";
        case ModelVariant::Proposed: return "proposed";
    }
    return "?";
}

inline std::string to_string(PredictionMode p) {
    return p == PredictionMode::Eps ? "eps" : "v";
}

inline ModelVariant variant_from_string(const std::string& s) {
    if (s == "base") return ModelVariant::Base;
    if (s == "offset") return ModelVariant::Offset;
    if (s == "zero_snr") return ModelVariant::ZeroSnr;
    if (s == "proposed") return ModelVariant::Proposed;
    throw ConfigError("unknown model variant: " + s);
}

inline PredictionMode prediction_from_string(const std::string& s) {
    if (s == "eps") return PredictionMode::Eps;
    if (s == "v") return PredictionMode::V;
    throw ConfigError("unknown prediction mode: " + s);
}

inline bool all_finite(const Vec& x) {
    for (double v : x)
        if (!std::isfinite(v)) return false;
    return true;
}

/// FNV-1a, used for config/run identifiers.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace auxdiff
