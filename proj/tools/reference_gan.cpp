#include "reference_gan.hpp"

#include <cmath>

#include "fregan/ops.hpp"

namespace fregan::reference {

namespace {

struct Weights {
    std::vector<Tensor> t;

    explicit Weights(const ParamSet& source) {
        for (const auto& e : source.entries()) t.push_back(e.value.clone(true));
    }
    void zero_grad() {
        for (auto& w : t) w.zero_grad();
    }
};

Tensor bn_act(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    return ops::leaky_relu(ops::batch_norm2d(x, gamma, beta, 1e-5f), 0.2f);
}

// stem, up8..up64, out
Tensor generate(const Weights& g, const Tensor& z) {
    const auto& w = g.t;
    Tensor h = bn_act(ops::conv2d_transpose(z, w[0], 1), w[1], w[2]);
    for (int b = 0; b < 4; ++b) {
        const std::size_t k = 3 + 3 * static_cast<std::size_t>(b);
        h = bn_act(ops::conv2d(ops::upsample_nearest2(h), w[k], std::nullopt, 1, 1), w[k + 1], w[k + 2]);
    }
    return ops::tanh(ops::conv2d(h, w[15], w[16], 1, 1));
}

struct Judged {
    Tensor score;
    Tensor decoded;
};

// down32..down4, score, dec1, dec2
Judged judge(const Weights& d, const Tensor& x) {
    const auto& w = d.t;
    Tensor h = x, at8;
    for (int b = 0; b < 4; ++b) {
        const std::size_t k = 3 * static_cast<std::size_t>(b);
        h = bn_act(ops::conv2d(h, w[k], std::nullopt, 2, 1), w[k + 1], w[k + 2]);
        if (b == 2) at8 = h;
    }
    Judged out;
    out.score = ops::sample_mean(ops::conv2d(h, w[12], w[13], 1, 0));
    Tensor r = bn_act(ops::conv2d(ops::upsample_nearest2(at8), w[14], std::nullopt, 1, 1), w[15], w[16]);
    out.decoded = ops::tanh(ops::conv2d(ops::upsample_nearest2(r), w[17], w[18], 1, 1));
    return out;
}

class PlainAdam {
public:
    PlainAdam(const Weights& w, const train::AdamConfig& c) : c_(c) {
        for (const auto& t : w.t) {
            m_.emplace_back(t.numel(), 0.0f);
            v_.emplace_back(t.numel(), 0.0f);
        }
    }

    void update(Weights& w) {
        ++t_;
        const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(c_.beta1), static_cast<double>(t_)));
        const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(c_.beta2), static_cast<double>(t_)));
        for (std::size_t i = 0; i < w.t.size(); ++i) {
            auto p = w.t[i].mutable_data();
            const bool has = w.t[i].has_grad();
            for (std::size_t k = 0; k < p.size(); ++k) {
                const float g = has ? w.t[i].grad()[k] : 0.0f;
                m_[i][k] = c_.beta1 * m_[i][k] + (1.0f - c_.beta1) * g;
                v_[i][k] = c_.beta2 * v_[i][k] + (1.0f - c_.beta2) * (g * g);
                p[k] -= c_.lr * (m_[i][k] / c1) / (std::sqrt(v_[i][k] / c2) + c_.eps);
            }
        }
    }

private:
    train::AdamConfig c_;
    std::int64_t t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

}  // namespace

std::vector<StepLosses> run_hinge_gan(const train::TrainConfig& config, int steps) {
    const nets::Model init(config.widths, config.seed);
    Weights g(init.g.params()), d(init.d.params());
    PlainAdam opt_g(g, config.adam), opt_d(d, config.adam);

    const data::ImageSet images = data::make_dataset(config.dataset);
    data::BatchIterator batches(images, config.batch, train::batch_seed(config.seed));

    std::vector<StepLosses> out;
    for (int it = 0; it < steps; ++it) {
        const Tensor real = batches.next();
        const int n = config.batch;
        StepLosses s;

        d.zero_grad();
        const Tensor fake = generate(g, nets::sample_latent(n, train::d_latent_seed(config.seed, it))).detach();
        const Judged r = judge(d, real);
        const Judged f = judge(d, fake);
        const Tensor real_margin = ops::relu_mean(ops::add_scalar(ops::scale(r.score, -1.0f), 1.0f));
        const Tensor fake_margin = ops::relu_mean(ops::add_scalar(f.score, 1.0f));
        const Tensor hinge = ops::add(real_margin, fake_margin);
        const Tensor recons = ops::l1_distance(r.decoded, ops::avg_pool(real, 2));
        backward(ops::add(hinge, recons));
        opt_d.update(d);
        s.l_d = hinge.item();
        s.l_recons = recons.item();

        g.zero_grad();
        const Judged judged = judge(d, generate(g, nets::sample_latent(n, train::g_latent_seed(config.seed, it))));
        const Tensor adv = ops::scale(ops::mean_all(judged.score), -1.0f);
        backward(adv);
        opt_g.update(g);
        s.l_g = adv.item();
        out.push_back(s);
    }
    return out;
}

}  // namespace fregan::reference
