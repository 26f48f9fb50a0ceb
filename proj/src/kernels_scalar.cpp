#include "fregan/kernels.hpp"

namespace fregan::kernels {
namespace {

void gemm_nn_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                    const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = c + i * ldc;
        if (!accumulate) {
            for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
        }
        for (std::size_t p = 0; p < k; ++p) {
            const float av = a[i * lda + p];
            const float* brow = b + p * ldb;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_nt_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                    const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a + i * lda;
        for (std::size_t j = 0; j < n; ++j) {
            const float* brow = b + j * ldb;
            float acc = 0.0f;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * ldc + j] = accumulate ? c[i * ldc + j] + acc : acc;
        }
    }
}

void axpy_scalar(std::size_t n, float alpha, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void leaky_relu_scalar(std::size_t n, float slope, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] >= 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_backward_scalar(std::size_t n, float slope, const float* x, const float* dy,
                                float* dx) {
    for (std::size_t i = 0; i < n; ++i) dx[i] += x[i] >= 0.0f ? dy[i] : slope * dy[i];
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{"scalar",           gemm_nn_scalar,    gemm_nt_scalar, axpy_scalar,
                                   leaky_relu_scalar, leaky_relu_backward_scalar};
    return table;
}

}  // namespace fregan::kernels
