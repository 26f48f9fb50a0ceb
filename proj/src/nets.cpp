#include "fregan/nets.hpp"

#include <stdexcept>

#include "fregan/ops.hpp"

namespace fregan::nets {

namespace {

constexpr float kSlope = 0.2f;
constexpr float kEps = 1e-5f;
constexpr std::uint64_t kGeneratorInit = 0x2001;
constexpr std::uint64_t kDiscriminatorInit = 0x2002;
constexpr std::uint64_t kHeadInit = 0x2003;

void add_bn(ParamSet& p, const std::string& prefix, int channels) {
    p.add(prefix + ".gamma", init_constant(channels, 1.0f));
    p.add(prefix + ".beta", init_constant(channels, 0.0f));
}

Tensor bn_leaky(const Tensor& x, const ParamSet& p, std::size_t at, bool frozen) {
    const auto& e = p.entries();
    return ops::leaky_relu(ops::batch_norm2d(x, use(e[at].value, frozen), use(e[at + 1].value, frozen), kEps), kSlope);
}

void require_shape(const char* who, const Tensor& t, int c, int h, int w) {
    const Shape& s = t.shape();
    if (s.n < 1 || s.c != c || s.h != h || s.w != w) {
        throw std::invalid_argument(std::string(who) + ": expected N×" + std::to_string(c) + "×" + std::to_string(h) +
                                    "×" + std::to_string(w) + " input, got " + s.str());
    }
}

}  // namespace

// Parameter layout per block: conv weight, bn gamma, bn beta.
Generator::Generator(const GeneratorWidths& w, Rng& rng) : widths_(w) {
    params_.add("stem.w", init_conv_weight({kLatentDim, w.c4, 4, 4}, rng));
    add_bn(params_, "stem.bn", w.c4);
    const int ins[] = {w.c4, w.c8, w.c16, w.c32};
    const int outs[] = {w.c8, w.c16, w.c32, w.c64};
    const char* names[] = {"up8", "up16", "up32", "up64"};
    for (int b = 0; b < 4; ++b) {
        params_.add(std::string(names[b]) + ".w", init_conv_weight({outs[b], ins[b], 3, 3}, rng));
        add_bn(params_, std::string(names[b]) + ".bn", outs[b]);
    }
    params_.add("out.w", init_conv_weight({3, w.c64, 3, 3}, rng));
    params_.add("out.b", init_constant(3, 0.0f));
}

GOutput Generator::forward(const Tensor& z, bool fsc_enabled, bool frozen) const {
    require_shape("Generator", z, kLatentDim, 1, 1);
    const auto& e = params_.entries();
    GOutput out;
    auto h = ops::conv2d_transpose(z, use(e[0].value, frozen), 1);
    h = bn_leaky(h, params_, 1, frozen);
    std::size_t at = 3;
    for (int scale = 8; scale <= 64; scale *= 2) {
        h = ops::conv2d(ops::upsample_nearest2(h), use(e[at].value, frozen), std::nullopt, 1, 1);
        h = bn_leaky(h, params_, at + 1, frozen);
        at += 3;
        if (scale <= 32) {
            if (fsc_enabled) h = gan::fsc_apply(h);
            out.taps.set(scale, h);
        }
    }
    out.image = ops::tanh(ops::conv2d(h, use(e[at].value, frozen), use(e[at + 1].value, frozen), 1, 1));
    return out;
}

Discriminator::Discriminator(const DiscriminatorWidths& w, Rng& rng) : widths_(w) {
    const int ins[] = {3, w.c32, w.c16, w.c8};
    const int outs[] = {w.c32, w.c16, w.c8, w.c4};
    const char* names[] = {"down32", "down16", "down8", "down4"};
    for (int b = 0; b < 4; ++b) {
        params_.add(std::string(names[b]) + ".w", init_conv_weight({outs[b], ins[b], 3, 3}, rng));
        add_bn(params_, std::string(names[b]) + ".bn", outs[b]);
    }
    params_.add("score.w", init_conv_weight({1, w.c4, 4, 4}, rng));
    params_.add("score.b", init_constant(1, 0.0f));
    params_.add("dec1.w", init_conv_weight({w.decoder, w.c8, 3, 3}, rng));
    add_bn(params_, "dec1.bn", w.decoder);
    params_.add("dec2.w", init_conv_weight({3, w.decoder, 3, 3}, rng));
    params_.add("dec2.b", init_constant(3, 0.0f));
}

int Discriminator::tap_channels(int scale) const {
    switch (scale) {
        case 32: return widths_.c32;
        case 16: return widths_.c16;
        case 8: return widths_.c8;
        default: throw std::invalid_argument("Discriminator: no tap at scale " + std::to_string(scale));
    }
}

DOutput Discriminator::forward(const Tensor& x, bool frozen) const {
    require_shape("Discriminator", x, 3, kImageSize, kImageSize);
    const auto& e = params_.entries();
    DOutput out;
    Tensor h = x;
    std::size_t at = 0;
    for (int scale = 32; scale >= 4; scale /= 2) {
        h = ops::conv2d(h, use(e[at].value, frozen), std::nullopt, 2, 1);
        h = bn_leaky(h, params_, at + 1, frozen);
        at += 3;
        if (scale >= 8) out.taps.set(scale, h);
    }
    out.score = ops::sample_mean(ops::conv2d(h, use(e[at].value, frozen), use(e[at + 1].value, frozen), 1, 0));
    at += 2;
    auto r = ops::conv2d(ops::upsample_nearest2(out.taps.at(8)), use(e[at].value, frozen), std::nullopt, 1, 1);
    r = bn_leaky(r, params_, at + 1, frozen);
    at += 3;
    r = ops::conv2d(ops::upsample_nearest2(r), use(e[at].value, frozen), use(e[at + 1].value, frozen), 1, 1);
    out.reconstruction = ops::tanh(r);
    return out;
}

Model::Model(const ModelWidths& w, std::uint64_t seed)
    : g([&] {
          Rng rng(derive_seed(seed, kGeneratorInit));
          return Generator(w.g, rng);
      }()),
      d([&] {
          Rng rng(derive_seed(seed, kDiscriminatorInit));
          return Discriminator(w.d, rng);
      }()),
      widths(w) {
    for (int scale : gan::kTapScales) {
        Rng rng(derive_seed(seed, kHeadInit, static_cast<std::uint64_t>(scale)));
        heads.emplace(scale, gan::HfdHead(scale, d.tap_channels(scale), w.hfd, rng));
    }
}

ParamSet Model::d_side() const {
    ParamSet p;
    p.extend(d.params(), "d/");
    for (const auto& [scale, head] : heads) p.extend(head.params(), "hfd" + std::to_string(scale) + "/");
    return p;
}

ParamSet Model::g_side() const {
    ParamSet p;
    p.extend(g.params(), "g/");
    return p;
}

Tensor sample_latent(int n, std::uint64_t seed) {
    Rng rng(seed);
    return Tensor::from_data({n, kLatentDim, 1, 1}, rng.normal_vector(static_cast<std::size_t>(n) * kLatentDim));
}

}  // namespace fregan::nets
