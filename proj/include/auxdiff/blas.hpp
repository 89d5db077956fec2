#pragma once

#include <cstdlib>
#include <mutex>

#include <dlfcn.h>

namespace auxdiff::blas {

// CBLAS constants (row-major only is used here).
enum { kRowMajor = 101, kNoTrans = 111, kTrans = 112 };

using sgemm_fn = void (*)(int, int, int, int, int, int, float, const float*, int, const float*,
                          int, float, float*, int);
using dgemm_fn = void (*)(int, int, int, int, int, int, double, const double*, int, const double*,
                          int, double, double*, int);

struct Backend {
    sgemm_fn sgemm = nullptr;
    dgemm_fn dgemm = nullptr;
};

// OpenBLAS picks its kernel from OPENBLAS_CORETYPE at library-load time.
// Virtualized machines often mask the CPU model string, which makes the
// dynamic-arch detection fall back to a slow generic kernel, so the core
// type is pinned from CPU features before dlopen. Loading lazily (instead
// of linking) is what makes the setenv effective.
inline const Backend& backend() {
    static Backend be;
    static std::once_flag once;
    std::call_once(once, [] {
        if (!std::getenv("OPENBLAS_CORETYPE")) {
            if (__builtin_cpu_supports("avx512f"))
                ::setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 1);
            else if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
                ::setenv("OPENBLAS_CORETYPE", "HASWELL", 1);
        }
        void* h = dlopen("libopenblas.so.0", RTLD_NOW | RTLD_LOCAL);
        if (!h) h = dlopen("libopenblas.so", RTLD_NOW | RTLD_LOCAL);
        if (h) {
            be.sgemm = reinterpret_cast<sgemm_fn>(dlsym(h, "cblas_sgemm"));
            be.dgemm = reinterpret_cast<dgemm_fn>(dlsym(h, "cblas_dgemm"));
        }
    });
    return be;
}

namespace detail {
// Plain fallback so the library still runs without OpenBLAS.
template <typename Real>
void gemm_naive(bool trans_a, bool trans_b, int m, int n, int k, Real alpha, const Real* a,
                int lda, const Real* b, int ldb, Real beta, Real* c, int ldc) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) {
                const Real av = trans_a ? a[p * lda + i] : a[i * lda + p];
                const Real bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
                acc += static_cast<double>(av) * static_cast<double>(bv);
            }
            c[i * ldc + j] = static_cast<Real>(alpha * acc) + beta * c[i * ldc + j];
        }
    }
}
}  // namespace detail

/// Row-major C = alpha * op(A) * op(B) + beta * C.
inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                 int lda, const float* b, int ldb, float beta, float* c, int ldc) {
    if (auto fn = backend().sgemm) {
        fn(kRowMajor, trans_a ? kTrans : kNoTrans, trans_b ? kTrans : kNoTrans, m, n, k, alpha, a,
           lda, b, ldb, beta, c, ldc);
    } else {
        detail::gemm_naive(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    }
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                 int lda, const double* b, int ldb, double beta, double* c, int ldc) {
    if (auto fn = backend().dgemm) {
        fn(kRowMajor, trans_a ? kTrans : kNoTrans, trans_b ? kTrans : kNoTrans, m, n, k, alpha, a,
           lda, b, ldb, beta, c, ldc);
    } else {
        detail::gemm_naive(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    }
}

}  // namespace auxdiff::blas
