#include <cmath>
#include <vector>

#include "doctest.h"
#include "fregan/kernels.hpp"
#include "fregan/rng.hpp"

using namespace fregan;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return rng.uniform_vector(n, -1.0f, 1.0f);
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::fabs(a[i] - b[i]) <= tol * (1.0 + std::fabs(a[i])));
}

}  // namespace

TEST_CASE("active table is one of the known variants") {
    const auto& t = kernels::active();
    CHECK((t.name == "scalar" || t.name == "avx2"));
}

TEST_CASE("simd gemm matches scalar reference") {
    const kernels::KernelTable* simd = kernels::avx2_table();
    if (simd == nullptr) {
        MESSAGE("AVX2 unavailable; equivalence not exercised");
        return;
    }
    const auto& ref = kernels::scalar_table();
    const std::size_t sizes[][3] = {{1, 1, 1}, {3, 7, 5}, {4, 16, 9}, {5, 33, 27}, {8, 100, 72}, {13, 257, 19}};
    std::uint64_t seed = 1;
    for (const auto& s : sizes) {
        const std::size_t m = s[0], n = s[1], k = s[2];
        CAPTURE(m);
        CAPTURE(n);
        CAPTURE(k);
        const auto a = random_vec(m * k, seed++);
        const auto b = random_vec(k * n, seed++);
        const auto bt = random_vec(n * k, seed++);
        for (bool acc : {false, true}) {
            auto c0 = random_vec(m * n, seed);
            auto c1 = c0;
            ref.gemm_nn(m, n, k, a.data(), k, b.data(), n, c0.data(), n, acc);
            simd->gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n, acc);
            check_close(c0, c1, 1e-5);

            auto d0 = random_vec(m * n, seed + 100);
            auto d1 = d0;
            ref.gemm_nt(m, n, k, a.data(), k, bt.data(), k, d0.data(), n, acc);
            simd->gemm_nt(m, n, k, a.data(), k, bt.data(), k, d1.data(), n, acc);
            check_close(d0, d1, 1e-5);
        }
    }
}

TEST_CASE("simd elementwise kernels match scalar reference") {
    const kernels::KernelTable* simd = kernels::avx2_table();
    if (simd == nullptr) return;
    const auto& ref = kernels::scalar_table();
    for (std::size_t n : {1u, 7u, 8u, 9u, 31u, 100u}) {
        auto x = random_vec(n, n);
        x[0] = 0.0f;
        const auto dy = random_vec(n, n + 1);
        std::vector<float> y0(n), y1(n);
        ref.leaky_relu(n, 0.2f, x.data(), y0.data());
        simd->leaky_relu(n, 0.2f, x.data(), y1.data());
        CHECK(y0 == y1);

        std::vector<float> g0(n, 0.5f), g1(n, 0.5f);
        ref.leaky_relu_backward(n, 0.2f, x.data(), dy.data(), g0.data());
        simd->leaky_relu_backward(n, 0.2f, x.data(), dy.data(), g1.data());
        CHECK(g0 == g1);

        auto a0 = random_vec(n, n + 2);
        auto a1 = a0;
        ref.axpy(n, -0.7f, x.data(), a0.data());
        simd->axpy(n, -0.7f, x.data(), a1.data());
        check_close(a0, a1, 1e-6);
    }
}
