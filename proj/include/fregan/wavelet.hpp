#pragma once
// Haar wavelet pooling and unpooling over feature maps.
//
// Pooling is a stride-2 grouped convolution with the four 2×2 Haar kernels
// (one output channel per input channel and band). Unpooling sums the four
// matching transposed convolutions. The kernels are orthonormal, so the two
// are exact inverses and band energies add up to the input energy.

#include <array>
#include <vector>

#include "fregan/tensor.hpp"

namespace fregan::wavelet {

struct HaarKernels {
    // Row-major 2×2 kernels: outer products of L = [1,1]/√2 and H = [-1,1]/√2.
    std::array<float, 4> ll;
    std::array<float, 4> lh;
    std::array<float, 4> hl;
    std::array<float, 4> hh;

    static HaarKernels standard();
};

struct WaveletBands {
    Tensor ll;
    Tensor lh;
    Tensor hl;
    Tensor hh;
};

// x must have even H and W; odd sizes are rejected rather than padded.
WaveletBands wave_pool(const Tensor& x, const HaarKernels& kernels = HaarKernels::standard());
Tensor wave_unpool(const WaveletBands& bands, const HaarKernels& kernels = HaarKernels::standard());

// lh + hl + hh
Tensor high_freq_sum(const WaveletBands& bands);

// Recursive decomposition of the LL band; element 0 is the finest level.
std::vector<WaveletBands> dwt_image(const Tensor& image, int levels,
                                    const HaarKernels& kernels = HaarKernels::standard());
Tensor idwt_image(const std::vector<WaveletBands>& levels, const HaarKernels& kernels = HaarKernels::standard());

}  // namespace fregan::wavelet
