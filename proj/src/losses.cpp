#include "fregan/losses.hpp"

#include <algorithm>
#include <cmath>

#include "fregan/ops.hpp"
#include "fregan/wavelet.hpp"

namespace fregan::gan {

namespace {

constexpr float kLeakySlope = 0.2f;
constexpr float kBnEps = 1e-5f;

bool is_tap_scale(int scale) {
    return std::find(std::begin(kTapScales), std::end(kTapScales), scale) != std::end(kTapScales);
}

void require_same_scales(const char* op, const FeatureTaps& a, const FeatureTaps& b) {
    if (a.scales() != b.scales()) throw std::invalid_argument(std::string(op) + ": tap scale sets differ");
}

float value_or_zero(const Tensor& t) { return t.defined() ? t.item() : 0.0f; }

}  // namespace

// ---------------------------------------------------------------------------

void FeatureTaps::set(int scale, Tensor features) {
    if (!is_tap_scale(scale)) {
        throw std::invalid_argument("FeatureTaps: scale " + std::to_string(scale) + " is not one of 8, 16, 32");
    }
    const Shape& s = features.shape();
    if (s.h != scale || s.w != scale) {
        throw std::invalid_argument("FeatureTaps: tap at scale " + std::to_string(scale) + " has shape " + s.str());
    }
    taps_.insert_or_assign(scale, std::move(features));
}

const Tensor& FeatureTaps::at(int scale) const {
    auto it = taps_.find(scale);
    if (it == taps_.end()) throw std::out_of_range("FeatureTaps: no tap at scale " + std::to_string(scale));
    return it->second;
}

std::vector<int> FeatureTaps::scales() const {
    std::vector<int> out;
    for (const auto& [scale, _] : taps_) out.push_back(scale);
    return out;
}

FeatureTaps FeatureTaps::detached() const {
    FeatureTaps out(source_);
    for (const auto& [scale, t] : taps_) out.taps_.emplace(scale, t.detach());
    return out;
}

// ---------------------------------------------------------------------------

HfdHead::HfdHead(int scale, int in_channels, int width, Rng& rng) : scale_(scale) {
    if (scale < 4 || scale % 2 != 0) throw std::invalid_argument("HfdHead: unsupported scale " + std::to_string(scale));
    int spatial = scale / 2;
    spatial = (spatial + 1) / 2;  // 3×3, stride 2, pad 1
    spatial = (spatial + 1) / 2;
    final_kernel_ = std::min(4, spatial);
    params_.add("conv1.w", init_conv_weight({width, in_channels, 3, 3}, rng));
    params_.add("bn1.gamma", init_constant(width, 1.0f));
    params_.add("bn1.beta", init_constant(width, 0.0f));
    params_.add("conv2.w", init_conv_weight({width, width, 3, 3}, rng));
    params_.add("bn2.gamma", init_constant(width, 1.0f));
    params_.add("bn2.beta", init_constant(width, 0.0f));
    params_.add("out.w", init_conv_weight({1, width, final_kernel_, final_kernel_}, rng));
    params_.add("out.b", init_constant(1, 0.0f));
}

Tensor HfdHead::score(const Tensor& hf, bool frozen) const {
    const auto& p = params_.entries();
    auto h = ops::conv2d(hf, use(p[0].value, frozen), std::nullopt, 2, 1);
    h = ops::leaky_relu(ops::batch_norm2d(h, use(p[1].value, frozen), use(p[2].value, frozen), kBnEps), kLeakySlope);
    h = ops::conv2d(h, use(p[3].value, frozen), std::nullopt, 2, 1);
    h = ops::leaky_relu(ops::batch_norm2d(h, use(p[4].value, frozen), use(p[5].value, frozen), kBnEps), kLeakySlope);
    h = ops::conv2d(h, use(p[6].value, frozen), use(p[7].value, frozen), 1, 0);
    return ops::sample_mean(h);
}

// ---------------------------------------------------------------------------

Tensor hinge_d_loss(const Tensor& real_scores, const Tensor& fake_scores) {
    auto real_term = ops::relu_mean(ops::add_scalar(ops::scale(real_scores, -1.0f), 1.0f));
    auto fake_term = ops::relu_mean(ops::add_scalar(fake_scores, 1.0f));
    return ops::add(real_term, fake_term);
}

Tensor hinge_g_loss(const Tensor& fake_scores) { return ops::scale(ops::mean_all(fake_scores), -1.0f); }

Tensor high_frequency(const Tensor& tap) { return wavelet::high_freq_sum(wavelet::wave_pool(tap)); }

namespace {

const HfdHead& head_for(const HfdHeads& heads, int scale) {
    auto it = heads.find(scale);
    if (it == heads.end()) throw std::invalid_argument("hfd: no head for scale " + std::to_string(scale));
    return it->second;
}

}  // namespace

Tensor hfd_d_loss(const FeatureTaps& real_taps, const FeatureTaps& fake_taps, const HfdHeads& heads,
                  std::map<int, float>* by_scale) {
    require_same_scales("hfd_d_loss", real_taps, fake_taps);
    Tensor total;
    for (int scale : real_taps.scales()) {
        const HfdHead& head = head_for(heads, scale);
        auto term = hinge_d_loss(head.score(high_frequency(real_taps.at(scale))),
                                 head.score(high_frequency(fake_taps.at(scale))));
        if (by_scale) (*by_scale)[scale] = term.item();
        total = total.defined() ? ops::add(total, term) : term;
    }
    return total.defined() ? total : Tensor::scalar(0.0f);
}

Tensor hfd_g_loss(const FeatureTaps& fake_taps, const HfdHeads& heads, float g_sign) {
    Tensor total;
    for (int scale : fake_taps.scales()) {
        const HfdHead& head = head_for(heads, scale);
        auto term = ops::mean_all(head.score(high_frequency(fake_taps.at(scale)), true));
        total = total.defined() ? ops::add(total, term) : term;
    }
    return total.defined() ? ops::scale(total, g_sign) : Tensor::scalar(0.0f);
}

HfdLosses hfd_losses(const FeatureTaps& real_taps, const FeatureTaps& fake_taps, const HfdHeads& heads, float g_sign) {
    HfdLosses out;
    out.d_loss = hfd_d_loss(real_taps, fake_taps, heads, &out.d_by_scale);
    out.g_loss = hfd_g_loss(fake_taps, heads, g_sign);
    return out;
}

Tensor fsc_apply(const Tensor& feature) {
    return ops::add(feature, wavelet::wave_unpool(wavelet::wave_pool(feature)));
}

HfaLoss hfa_loss(const FeatureTaps& d_real_taps, const FeatureTaps& g_taps) {
    require_same_scales("hfa_loss", d_real_taps, g_taps);
    HfaLoss out;
    for (int scale : d_real_taps.scales()) {
        const Tensor d_tap = d_real_taps.at(scale).detach();
        const Tensor& g_tap = g_taps.at(scale);
        if (d_tap.shape().n != g_tap.shape().n) {
            throw std::invalid_argument("hfa_loss: batch sizes differ at scale " + std::to_string(scale) + " (" +
                                        std::to_string(d_tap.shape().n) + " vs " + std::to_string(g_tap.shape().n) +
                                        ")");
        }
        auto hf_d = ops::channel_mean(high_frequency(d_tap));
        auto hf_g = ops::channel_mean(high_frequency(g_tap));
        auto term = ops::l1_distance(hf_d, hf_g);
        out.by_scale[scale] = term.item();
        out.total = out.total.defined() ? ops::add(out.total, term) : term;
    }
    if (!out.total.defined()) out.total = Tensor::scalar(0.0f);
    return out;
}

Tensor recon_loss(const Tensor& decoder_output, const Tensor& real_image) {
    const Shape& d = decoder_output.shape();
    const Shape& r = real_image.shape();
    if (d.h != d.w || r.h != r.w || d.h < 1 || r.h < d.h || r.h % d.h != 0) {
        throw std::invalid_argument("recon_loss: cannot box-downsample " + r.str() + " to match " + d.str());
    }
    auto target = ops::avg_pool(real_image.detach(), r.h / d.h);
    if (!(target.shape() == d)) {
        throw std::invalid_argument("recon_loss: downsampled target " + target.shape().str() + " vs decoder " + d.str());
    }
    return ops::l1_distance(decoder_output, target);
}

// ---------------------------------------------------------------------------

NonFiniteLoss::NonFiniteLoss(const std::string& term, float value)
    : std::runtime_error("non-finite loss term " + term + " = " + std::to_string(value)), term_(term) {}

void check_finite(const LossParts& parts) {
    const std::pair<const char*, const Tensor*> terms[] = {
        {"l_d", &parts.l_d},       {"l_g", &parts.l_g},         {"l_d_hf", &parts.l_d_hf},
        {"l_g_hf", &parts.l_g_hf}, {"l_align", &parts.l_align}, {"l_recons", &parts.l_recons},
    };
    for (const auto& [name, t] : terms) {
        if (t->defined() && !std::isfinite(t->item())) throw NonFiniteLoss(name, t->item());
    }
}

namespace {

Tensor sum_defined(std::initializer_list<const Tensor*> terms) {
    Tensor total;
    for (const Tensor* t : terms) {
        if (!t->defined()) continue;
        total = total.defined() ? ops::add(total, *t) : *t;
    }
    return total.defined() ? total : Tensor::scalar(0.0f);
}

}  // namespace

Tensor d_total(const LossParts& parts, const Ablation& ablation) {
    const Tensor none;
    return sum_defined({&parts.l_d, &parts.l_recons, ablation.hfd ? &parts.l_d_hf : &none});
}

Tensor g_total(const LossParts& parts, const Ablation& ablation) {
    const Tensor none;
    return sum_defined({&parts.l_g, ablation.hfd ? &parts.l_g_hf : &none, ablation.hfa ? &parts.l_align : &none});
}

Totals total_losses(const LossParts& parts, const Ablation& ablation) {
    check_finite(parts);
    Totals out{d_total(parts, ablation), g_total(parts, ablation), {}};
    out.report.l_d = value_or_zero(parts.l_d);
    out.report.l_g = value_or_zero(parts.l_g);
    out.report.l_d_hf = ablation.hfd ? value_or_zero(parts.l_d_hf) : 0.0f;
    out.report.l_g_hf = ablation.hfd ? value_or_zero(parts.l_g_hf) : 0.0f;
    out.report.l_align = ablation.hfa ? value_or_zero(parts.l_align) : 0.0f;
    out.report.l_recons = value_or_zero(parts.l_recons);
    return out;
}

}  // namespace fregan::gan
