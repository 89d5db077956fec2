#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "auxdiff/common.hpp"

namespace auxdiff {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
}  // namespace detail

// Named stream ids so independent parts of a run never share draws.
namespace stream {
constexpr std::uint64_t dataset = 1;
constexpr std::uint64_t model_init = 2;
constexpr std::uint64_t batch_select = 3;
constexpr std::uint64_t pair = 4;
constexpr std::uint64_t sample_chain = 5;
constexpr std::uint64_t metric_subsample = 6;
constexpr std::uint64_t eval_gen = 7;
constexpr std::uint64_t eval_metric = 8;
constexpr std::uint64_t dataset_file = 9;
}  // namespace stream

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose, std::uint64_t a = 0,
                                 std::uint64_t b = 0) {
    std::uint64_t h = detail::splitmix64(master);
    h = detail::splitmix64(h ^ (purpose * 0x9e3779b97f4a7c15ull));
    h = detail::splitmix64(h ^ (a * 0xbf58476d1ce4e5b9ull));
    h = detail::splitmix64(h ^ (b * 0x94d049bb133111ebull));
    return h;
}

/// Deterministic RNG with cheap counter-derived substreams.
/// Normal draws use Box-Muller with an explicit one-value cache so the
/// consumption pattern is fully specified (needed by the bitwise
/// reduction checks).
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : gen_(detail::splitmix64(seed)) {}

    static Rng substream(std::uint64_t master, std::uint64_t purpose, std::uint64_t a = 0,
                         std::uint64_t b = 0) {
        return Rng(derive_seed(master, purpose, a, b));
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        // Rejection sampling on the top multiple of span.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        // u1 in (0, 1] so log() is finite.
        const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    void fill_normal(double* out, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) out[i] = normal();
    }

    Vec normal_vec(std::size_t n) {
        Vec out(n);
        fill_normal(out.data(), n);
        return out;
    }

   private:
    std::mt19937_64 gen_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

}  // namespace auxdiff
