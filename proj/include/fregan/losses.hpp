#pragma once
// Frequency-aware GAN components: the high-frequency discriminator heads
// (HFD), the frequency skip connection (FSC), high-frequency alignment (HFA),
// and the hinge/reconstruction objectives they are combined with.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "fregan/params.hpp"
#include "fregan/tensor.hpp"

namespace fregan::gan {

enum class TapSource { generator, discriminator };

// Intermediate activations keyed by spatial scale (a subset of {8, 16, 32}).
class FeatureTaps {
public:
    explicit FeatureTaps(TapSource source) : source_(source) {}

    // Rejects scales outside {8,16,32} and tensors whose H or W differ from the scale.
    void set(int scale, Tensor features);
    const Tensor& at(int scale) const;
    bool contains(int scale) const { return taps_.count(scale) != 0; }
    std::vector<int> scales() const;
    TapSource source() const { return source_; }
    // Same scales, every tensor detached.
    FeatureTaps detached() const;

private:
    TapSource source_;
    std::map<int, Tensor> taps_;
};

inline constexpr int kTapScales[] = {8, 16, 32};

// Per-scale HFD head: two (3×3 stride-2 conv → batch norm → leaky_relu 0.2)
// blocks, then a valid conv to one channel averaged into a per-sample score.
// The final kernel is 4×4 when the remaining map allows, else the map size.
class HfdHead {
public:
    HfdHead(int scale, int in_channels, int width, Rng& rng);

    // hf: N×in_channels×(scale/2)×(scale/2) → N×1×1×1
    Tensor score(const Tensor& hf, bool frozen = false) const;
    int scale() const { return scale_; }
    int final_kernel() const { return final_kernel_; }
    const ParamSet& params() const { return params_; }
    ParamSet& params() { return params_; }

private:
    int scale_;
    int final_kernel_;
    ParamSet params_;
};

using HfdHeads = std::map<int, HfdHead>;

// Printed objective has +E[D_H(HF_fake)]; the generator loss here uses
// `sign * E[D_H(HF_fake)]`, defaulting to the hinge-consistent -1.
inline constexpr float kDefaultHfdGeneratorSign = -1.0f;

struct HfdLosses {
    Tensor d_loss;  // Σ_scales hinge_d_loss(real HF scores, fake HF scores)
    Tensor g_loss;  // sign · Σ_scales mean(fake HF scores)
    std::map<int, float> d_by_scale;
};

// mean(relu(1 - real)) + mean(relu(1 + fake))
Tensor hinge_d_loss(const Tensor& real_scores, const Tensor& fake_scores);
// -mean(fake)
Tensor hinge_g_loss(const Tensor& fake_scores);

// HF map for one tap: lh + hl + hh of its Haar decomposition.
Tensor high_frequency(const Tensor& tap);

HfdLosses hfd_losses(const FeatureTaps& real_taps, const FeatureTaps& fake_taps, const HfdHeads& heads,
                     float g_sign = kDefaultHfdGeneratorSign);
// D-side HFD term only, heads trainable.
Tensor hfd_d_loss(const FeatureTaps& real_taps, const FeatureTaps& fake_taps, const HfdHeads& heads,
                  std::map<int, float>* by_scale = nullptr);
// G-side HFD term; heads frozen so only the taps receive gradient.
Tensor hfd_g_loss(const FeatureTaps& fake_taps, const HfdHeads& heads, float g_sign = kDefaultHfdGeneratorSign);

// feature + wave_unpool(wave_pool(feature))
Tensor fsc_apply(const Tensor& feature);

struct HfaLoss {
    Tensor total;
    std::map<int, float> by_scale;
};

// Σ_scales l1_distance(channel_mean(HF(d_tap)), channel_mean(HF(g_tap))).
// Discriminator taps are detached inside; gradient reaches the generator only.
HfaLoss hfa_loss(const FeatureTaps& d_real_taps, const FeatureTaps& g_taps);

// Mean absolute error against the real image box-downsampled to the decoder size.
Tensor recon_loss(const Tensor& decoder_output, const Tensor& real_image);

struct Ablation {
    bool hfd = true;
    bool hfa = true;
    bool fsc = true;
};

struct LossReport {
    float l_d = 0.0f;
    float l_g = 0.0f;
    float l_d_hf = 0.0f;
    float l_g_hf = 0.0f;
    float l_align = 0.0f;
    float l_recons = 0.0f;
    std::map<int, float> l_d_hf_by_scale;
    std::map<int, float> l_align_by_scale;

    bool operator==(const LossReport&) const = default;
};

// Undefined tensors stand for terms that were not computed (value 0).
struct LossParts {
    Tensor l_d;
    Tensor l_g;
    Tensor l_d_hf;
    Tensor l_g_hf;
    Tensor l_align;
    Tensor l_recons;
};

class NonFiniteLoss : public std::runtime_error {
public:
    NonFiniteLoss(const std::string& term, float value);
    const std::string& term() const { return term_; }

private:
    std::string term_;
};

// l_d + l_recons + [hfd] l_d_hf
Tensor d_total(const LossParts& parts, const Ablation& ablation);
// l_g + [hfd] l_g_hf + [hfa] l_align
Tensor g_total(const LossParts& parts, const Ablation& ablation);

struct Totals {
    Tensor d_total;
    Tensor g_total;
    LossReport report;
};

// Throws NonFiniteLoss naming the first non-finite term.
Totals total_losses(const LossParts& parts, const Ablation& ablation);
void check_finite(const LossParts& parts);

}  // namespace fregan::gan
