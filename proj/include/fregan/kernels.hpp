#pragma once
// Dense float kernels behind the tensor core.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2/FMA
// variant. The variant is chosen once at runtime from CPUID; tests compare
// the two directly.

#include <cstddef>
#include <string_view>

namespace fregan::kernels {

// Row-major matrices with explicit leading dimensions.
//   gemm_nn: C[M,N] (+)= A[M,K] * B[K,N]
//   gemm_nt: C[M,N] (+)= A[M,K] * B[N,K]^T
// When `accumulate` is false C is overwritten.
struct KernelTable {
    std::string_view name;
    void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                    const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
    void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                    const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
    // y += alpha * x
    void (*axpy)(std::size_t n, float alpha, const float* x, float* y);
    // y = x >= 0 ? x : slope * x
    void (*leaky_relu)(std::size_t n, float slope, const float* x, float* y);
    // dx += dy * (x >= 0 ? 1 : slope)
    void (*leaky_relu_backward)(std::size_t n, float slope, const float* x, const float* dy,
                                float* dx);
};

const KernelTable& scalar_table();

// Null when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

// The table used by the tensor core: AVX2 when available unless the
// environment variable FREGAN_KERNELS=scalar is set at first use.
const KernelTable& active();

}  // namespace fregan::kernels
