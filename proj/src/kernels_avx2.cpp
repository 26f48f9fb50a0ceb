// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include "fregan/kernels.hpp"

#include <cmath>

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define FREGAN_HAVE_AVX2 1
#else
#define FREGAN_HAVE_AVX2 0
#endif

namespace fregan::kernels {

#if FREGAN_HAVE_AVX2
namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

// R rows of C, 16 columns starting at column 0 of the given pointers.
template <int R>
inline void block_nn_16(std::size_t k, const float* a, std::size_t lda, const float* b,
                        std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    __m256 acc0[R];
    __m256 acc1[R];
    for (int r = 0; r < R; ++r) {
        acc0[r] = accumulate ? _mm256_loadu_ps(c + r * ldc) : _mm256_setzero_ps();
        acc1[r] = accumulate ? _mm256_loadu_ps(c + r * ldc + 8) : _mm256_setzero_ps();
    }
    for (std::size_t p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
        const __m256 b1 = _mm256_loadu_ps(b + p * ldb + 8);
        for (int r = 0; r < R; ++r) {
            const __m256 av = _mm256_broadcast_ss(a + r * lda + p);
            acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
            acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
        }
    }
    for (int r = 0; r < R; ++r) {
        _mm256_storeu_ps(c + r * ldc, acc0[r]);
        _mm256_storeu_ps(c + r * ldc + 8, acc1[r]);
    }
}

template <int R>
inline void block_nn_8(std::size_t k, const float* a, std::size_t lda, const float* b,
                       std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    __m256 acc[R];
    for (int r = 0; r < R; ++r) acc[r] = accumulate ? _mm256_loadu_ps(c + r * ldc) : _mm256_setzero_ps();
    for (std::size_t p = 0; p < k; ++p) {
        const __m256 bv = _mm256_loadu_ps(b + p * ldb);
        for (int r = 0; r < R; ++r) {
            acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a + r * lda + p), bv, acc[r]);
        }
    }
    for (int r = 0; r < R; ++r) _mm256_storeu_ps(c + r * ldc, acc[r]);
}

template <int R>
inline void block_nn_tail(std::size_t cols, std::size_t k, const float* a, std::size_t lda,
                          const float* b, std::size_t ldb, float* c, std::size_t ldc,
                          bool accumulate) {
    for (int r = 0; r < R; ++r) {
        for (std::size_t j = 0; j < cols; ++j) {
            float acc = accumulate ? c[r * ldc + j] : 0.0f;
            for (std::size_t p = 0; p < k; ++p) acc = std::fma(a[r * lda + p], b[p * ldb + j], acc);
            c[r * ldc + j] = acc;
        }
    }
}

template <int R>
inline void rows_nn(std::size_t n, std::size_t k, const float* a, std::size_t lda, const float* b,
                    std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) block_nn_16<R>(k, a, lda, b + j, ldb, c + j, ldc, accumulate);
    for (; j + 8 <= n; j += 8) block_nn_8<R>(k, a, lda, b + j, ldb, c + j, ldc, accumulate);
    if (j < n) block_nn_tail<R>(n - j, k, a, lda, b + j, ldb, c + j, ldc, accumulate);
}

void gemm_nn_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) rows_nn<4>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
    for (; i < m; ++i) rows_nn<1>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
}

void gemm_nt_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                  const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a + i * lda;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const float* b0 = b + j * ldb;
            const float* b1 = b0 + ldb;
            const float* b2 = b1 + ldb;
            const float* b3 = b2 + ldb;
            __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
            __m256 s2 = _mm256_setzero_ps(), s3 = _mm256_setzero_ps();
            std::size_t p = 0;
            for (; p + 8 <= k; p += 8) {
                const __m256 av = _mm256_loadu_ps(arow + p);
                s0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + p), s0);
                s1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + p), s1);
                s2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b2 + p), s2);
                s3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b3 + p), s3);
            }
            float r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
            for (; p < k; ++p) {
                r0 = std::fma(arow[p], b0[p], r0);
                r1 = std::fma(arow[p], b1[p], r1);
                r2 = std::fma(arow[p], b2[p], r2);
                r3 = std::fma(arow[p], b3[p], r3);
            }
            float* crow = c + i * ldc + j;
            if (accumulate) {
                crow[0] += r0, crow[1] += r1, crow[2] += r2, crow[3] += r3;
            } else {
                crow[0] = r0, crow[1] = r1, crow[2] = r2, crow[3] = r3;
            }
        }
        for (; j < n; ++j) {
            const float* brow = b + j * ldb;
            __m256 s = _mm256_setzero_ps();
            std::size_t p = 0;
            for (; p + 8 <= k; p += 8) s = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), s);
            float r = hsum(s);
            for (; p < k; ++p) r = std::fma(arow[p], brow[p], r);
            c[i * ldc + j] = accumulate ? c[i * ldc + j] + r : r;
        }
    }
}

void axpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
    const __m256 av = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void leaky_relu_avx2(std::size_t n, float slope, const float* x, float* y) {
    const __m256 sv = _mm256_set1_ps(slope);
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 neg = _mm256_cmp_ps(v, zero, _CMP_LT_OQ);
        _mm256_storeu_ps(y + i, _mm256_blendv_ps(v, _mm256_mul_ps(v, sv), neg));
    }
    for (; i < n; ++i) y[i] = x[i] >= 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_backward_avx2(std::size_t n, float slope, const float* x, const float* dy,
                              float* dx) {
    const __m256 sv = _mm256_set1_ps(slope);
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 g = _mm256_loadu_ps(dy + i);
        const __m256 neg = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_LT_OQ);
        const __m256 local = _mm256_blendv_ps(g, _mm256_mul_ps(g, sv), neg);
        _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), local));
    }
    for (; i < n; ++i) dx[i] += x[i] >= 0.0f ? dy[i] : slope * dy[i];
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable table{"avx2",          gemm_nn_avx2,   gemm_nt_avx2, axpy_avx2,
                                   leaky_relu_avx2, leaky_relu_backward_avx2};
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &table : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace fregan::kernels
