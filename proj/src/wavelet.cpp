#include "fregan/wavelet.hpp"

#include <stdexcept>
#include <string>

#include "fregan/ops.hpp"

namespace fregan::wavelet {

HaarKernels HaarKernels::standard() {
    // L^T L, L^T H, H^T L, H^T H with the 1/√2 factors multiplied out.
    return HaarKernels{
        {0.5f, 0.5f, 0.5f, 0.5f},
        {-0.5f, 0.5f, -0.5f, 0.5f},
        {-0.5f, -0.5f, 0.5f, 0.5f},
        {0.5f, -0.5f, -0.5f, 0.5f},
    };
}

namespace {

// Depthwise weight (C, 1, 2, 2); constant, never trained.
Tensor expand_kernel(const std::array<float, 4>& k, int channels) {
    std::vector<float> w(static_cast<std::size_t>(channels) * 4);
    for (int c = 0; c < channels; ++c) {
        for (int i = 0; i < 4; ++i) w[c * 4 + i] = k[i];
    }
    return Tensor::from_data({channels, 1, 2, 2}, std::move(w), false);
}

}  // namespace

WaveletBands wave_pool(const Tensor& x, const HaarKernels& kernels) {
    const Shape& s = x.shape();
    if (s.h < 2 || s.w < 2 || s.h % 2 != 0 || s.w % 2 != 0) {
        throw std::invalid_argument("wave_pool: spatial size " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                    " must be even and >= 2; pad the input before decomposing");
    }
    auto band = [&](const std::array<float, 4>& k) {
        return ops::conv2d(x, expand_kernel(k, s.c), std::nullopt, 2, 0, s.c);
    };
    return {band(kernels.ll), band(kernels.lh), band(kernels.hl), band(kernels.hh)};
}

Tensor wave_unpool(const WaveletBands& bands, const HaarKernels& kernels) {
    const Shape& s = bands.ll.shape();
    for (const Tensor* t : {&bands.lh, &bands.hl, &bands.hh}) {
        if (!(t->shape() == s)) {
            throw std::invalid_argument("wave_unpool: band shapes differ (" + s.str() + " vs " + t->shape().str() + ")");
        }
    }
    auto up = [&](const Tensor& band, const std::array<float, 4>& k) {
        return ops::conv2d_transpose(band, expand_kernel(k, s.c), 2, s.c);
    };
    return ops::add(ops::add(up(bands.ll, kernels.ll), up(bands.lh, kernels.lh)),
                    ops::add(up(bands.hl, kernels.hl), up(bands.hh, kernels.hh)));
}

Tensor high_freq_sum(const WaveletBands& bands) {
    return ops::add(ops::add(bands.lh, bands.hl), bands.hh);
}

std::vector<WaveletBands> dwt_image(const Tensor& image, int levels, const HaarKernels& kernels) {
    if (levels < 1) throw std::invalid_argument("dwt_image: levels must be >= 1");
    const Shape& s = image.shape();
    const int div = 1 << levels;
    if (s.h % div != 0 || s.w % div != 0) {
        throw std::invalid_argument("dwt_image: " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                    " is not divisible by 2^" + std::to_string(levels));
    }
    std::vector<WaveletBands> out;
    Tensor current = image;
    for (int level = 0; level < levels; ++level) {
        out.push_back(wave_pool(current, kernels));
        current = out.back().ll;
    }
    return out;
}

Tensor idwt_image(const std::vector<WaveletBands>& levels, const HaarKernels& kernels) {
    if (levels.empty()) throw std::invalid_argument("idwt_image: no levels");
    Tensor current = levels.back().ll;
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
        current = wave_unpool({current, it->lh, it->hl, it->hh}, kernels);
    }
    return current;
}

}  // namespace fregan::wavelet
