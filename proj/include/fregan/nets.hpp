#pragma once
// Toy generator / discriminator for 64×64 RGB images with feature taps at
// 8, 16 and 32.

#include "fregan/losses.hpp"
#include "fregan/params.hpp"
#include "fregan/rng.hpp"

namespace fregan::nets {

inline constexpr int kLatentDim = 64;
inline constexpr int kImageSize = 64;

struct GeneratorWidths {
    int c4 = 32;   // stem
    int c8 = 32;
    int c16 = 16;
    int c32 = 16;
    int c64 = 8;
    bool operator==(const GeneratorWidths&) const = default;
};

struct DiscriminatorWidths {
    int c32 = 8;
    int c16 = 16;
    int c8 = 32;
    int c4 = 32;
    int decoder = 8;
    bool operator==(const DiscriminatorWidths&) const = default;
};

struct ModelWidths {
    GeneratorWidths g;
    DiscriminatorWidths d;
    int hfd = 8;  // HFD head width
    bool operator==(const ModelWidths&) const = default;
};

struct GOutput {
    Tensor image;  // N×3×64×64, tanh range
    gan::FeatureTaps taps{gan::TapSource::generator};
};

struct DOutput {
    Tensor score;           // N×1×1×1
    gan::FeatureTaps taps{gan::TapSource::discriminator};
    Tensor reconstruction;  // N×3×32×32 from the 8×8 tap
};

class Generator {
public:
    Generator(const GeneratorWidths& widths, Rng& rng);
    // z: N×64×1×1. frozen: parameters enter the graph detached.
    GOutput forward(const Tensor& z, bool fsc_enabled, bool frozen = false) const;
    const ParamSet& params() const { return params_; }
    ParamSet& params() { return params_; }
    const GeneratorWidths& widths() const { return widths_; }

private:
    GeneratorWidths widths_;
    ParamSet params_;
};

class Discriminator {
public:
    Discriminator(const DiscriminatorWidths& widths, Rng& rng);
    // x: N×3×64×64.
    DOutput forward(const Tensor& x, bool frozen = false) const;
    const ParamSet& params() const { return params_; }
    ParamSet& params() { return params_; }
    const DiscriminatorWidths& widths() const { return widths_; }
    // Channels of the tap at each scale.
    int tap_channels(int scale) const;

private:
    DiscriminatorWidths widths_;
    ParamSet params_;
};

// All trainable state of one model, built deterministically from a seed.
struct Model {
    Model(const ModelWidths& widths, std::uint64_t seed);
    Generator g;
    Discriminator d;
    gan::HfdHeads heads;
    ModelWidths widths;

    // Discriminator parameters plus HFD heads, prefixed "d/" and "hfd<scale>/".
    ParamSet d_side() const;
    ParamSet g_side() const;
};

Tensor sample_latent(int n, std::uint64_t seed);

}  // namespace fregan::nets
