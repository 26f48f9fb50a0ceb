#include "checks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "fregan/gradcheck.hpp"
#include "fregan/losses.hpp"
#include "fregan/ops.hpp"
#include "fregan/spectral.hpp"
#include "reference_gan.hpp"

namespace fregan::checks {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

SuiteResult timed(const std::string& name, const std::function<void(SuiteResult&)>& body) {
    SuiteResult r;
    r.name = name;
    const auto t0 = Clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
}

Tensor uniform(Shape s, Rng& rng, float lo = -1.0f, float hi = 1.0f, bool grad = false) {
    return Tensor::from_data(s, rng.uniform_vector(s.numel(), lo, hi), grad);
}

// Values with |v - k| >= gap for every kink k.
Tensor away_from(Shape s, Rng& rng, std::vector<float> kinks, float gap, float lo, float hi) {
    std::vector<float> v(s.numel());
    for (auto& x : v) {
        bool ok = false;
        while (!ok) {
            x = static_cast<float>(rng.uniform(lo, hi));
            ok = true;
            for (float k : kinks) ok = ok && std::fabs(x - k) >= gap;
        }
    }
    return Tensor::from_data(s, std::move(v), true);
}

Shape random_shape(const CorpusOptions& o, Rng& rng) {
    return {rng.uniform_int(1, o.max_n), rng.uniform_int(1, o.max_c), 2 * rng.uniform_int(1, o.max_size / 2),
            2 * rng.uniform_int(1, o.max_size / 2)};
}

double energy(const Tensor& t) {
    double e = 0.0;
    for (float v : t.data()) e += static_cast<double>(v) * v;
    return e;
}

double dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

// Fixed random projection keeps the scalar small so its rounding stays small.
Tensor project(const Tensor& t, std::uint64_t seed) {
    Rng rng(seed);
    return ops::sum_all(ops::mul(t, uniform(t.shape(), rng, -0.1f, 0.1f)));
}

}  // namespace

wavelet::HaarKernels perturbed_kernels(float delta) {
    auto k = wavelet::HaarKernels::standard();
    k.hh[0] += delta;
    return k;
}

SuiteResult reconstruction(const CorpusOptions& corpus, const wavelet::HaarKernels& kernels) {
    return timed("reconstruction", [&](SuiteResult& r) {
        Rng rng(corpus.seed);
        double worst = 0.0;
        for (int i = 0; i < corpus.cases; ++i) {
            const Tensor x = uniform(random_shape(corpus, rng), rng);
            const Tensor y = wavelet::wave_unpool(wavelet::wave_pool(x, kernels), kernels);
            for (std::size_t k = 0; k < x.numel(); ++k)
                worst = std::max(worst, std::fabs(static_cast<double>(y.data()[k]) - x.data()[k]));
        }
        r.passed = worst < kReconstructionTol;
        r.detail = fmt("max_abs_error=%.3g tol=%.0e", worst, kReconstructionTol);
    });
}

SuiteResult parseval(const CorpusOptions& corpus) {
    return timed("parseval", [&](SuiteResult& r) {
        Rng rng(corpus.seed);
        double worst = 0.0, worst_share = 0.0;
        for (int i = 0; i < corpus.cases; ++i) {
            const Tensor x = uniform(random_shape(corpus, rng), rng);
            const auto b = wavelet::wave_pool(x);
            const double e = energy(x);
            const double bands = energy(b.ll) + energy(b.lh) + energy(b.hl) + energy(b.hh);
            worst = std::max(worst, std::fabs(bands - e) / e);
            worst_share = std::max(worst_share, std::fabs(spectral::band_energy_stats(x).sum() - 1.0));
        }
        r.passed = worst < kParsevalTol && worst_share < kShareSumTol;
        r.detail = fmt("max_rel_error=%.3g max_share_sum_error=%.3g", worst, worst_share);
    });
}

SuiteResult gradients(std::uint64_t seed) {
    return timed("gradcheck", [&](SuiteResult& r) {
        Rng rng(seed);
        struct Case {
            const char* op;
            std::function<Tensor()> loss;
            std::vector<Tensor> inputs;
            // Ops linear between kinks take a wider step; the difference is exact there.
            float step = 1e-3f;
        };
        std::vector<Case> cases;

        {
            auto x = uniform({2, 3, 6, 6}, rng, -1, 1, true);
            auto w = uniform({4, 3, 3, 3}, rng, -0.5f, 0.5f, true);
            auto b = uniform({1, 4, 1, 1}, rng, -1, 1, true);
            cases.push_back({"conv2d", [=] { return project(ops::conv2d(x, w, b, 2, 1), 1); }, {x, w, b}, 1e-2f});
            auto xg = uniform({1, 4, 5, 5}, rng, -1, 1, true);
            auto wg = uniform({4, 2, 3, 3}, rng, -0.5f, 0.5f, true);
            cases.push_back({"conv2d(groups)", [=] { return project(ops::conv2d(xg, wg, std::nullopt, 1, 1, 2), 2); },
                             {xg, wg}, 1e-2f});
        }
        {
            auto y = uniform({2, 4, 3, 3}, rng, -1, 1, true);
            auto w = uniform({4, 3, 4, 4}, rng, -0.5f, 0.5f, true);
            cases.push_back({"conv2d_transpose", [=] { return project(ops::conv2d_transpose(y, w, 2), 3); }, {y, w}, 1e-2f});
        }
        {
            auto x = uniform({3, 2, 3, 3}, rng, -1, 1, true);
            auto gamma = uniform({1, 2, 1, 1}, rng, 0.5f, 1.5f, true);
            auto beta = uniform({1, 2, 1, 1}, rng, -1, 1, true);
            cases.push_back({"batch_norm2d", [=] { return project(ops::batch_norm2d(x, gamma, beta), 4); },
                             {x, gamma, beta}});
        }
        {
            auto x = away_from({2, 2, 3, 3}, rng, {0.0f}, 0.01f, -1, 1);
            cases.push_back({"leaky_relu", [=] { return project(ops::leaky_relu(x, 0.2f), 5); }, {x}});
            auto t = uniform({2, 2, 3, 3}, rng, -2, 2, true);
            cases.push_back({"tanh", [=] { return project(ops::tanh(t), 6); }, {t}});
            auto u = uniform({2, 2, 3, 3}, rng, -1, 1, true);
            cases.push_back({"upsample_nearest2", [=] { return project(ops::upsample_nearest2(u), 7); }, {u}, 1e-2f});
        }
        {
            auto a = uniform({2, 3, 4, 4}, rng, -1, 1, true);
            std::vector<float> bv(a.numel());
            for (std::size_t i = 0; i < bv.size(); ++i) {
                const float off = static_cast<float>(rng.uniform(0.1, 1.0));
                bv[i] = a.data()[i] + (rng.uniform() < 0.5 ? -off : off);
            }
            auto b = Tensor::from_data(a.shape(), std::move(bv), true);
            cases.push_back({"l1_distance", [=] { return ops::l1_distance(a, b); }, {a, b}, 1e-2f});
        }
        {
            auto real = away_from({6, 1, 1, 1}, rng, {1.0f}, 0.05f, -1.5f, 1.5f);
            auto fake = away_from({6, 1, 1, 1}, rng, {-1.0f}, 0.05f, -1.5f, 1.5f);
            cases.push_back({"hinge_d_loss", [=] { return gan::hinge_d_loss(real, fake); }, {real, fake}, 1e-2f});
            auto s = uniform({6, 1, 1, 1}, rng, -3, 3, true);
            cases.push_back({"hinge_g_loss", [=] { return gan::hinge_g_loss(s); }, {s}, 1e-2f});
        }
        {
            // Real-side taps are the generator taps plus a ±0.05 checkerboard, so every
            // high-band gap starts at 0.1, far from the L1 kink, and the loss stays small.
            gan::FeatureTaps d_taps(gan::TapSource::discriminator), g_taps(gan::TapSource::generator);
            std::vector<Tensor> g_inputs;
            for (int scale : {8, 16}) {
                auto g = uniform({2, 2, scale, scale}, rng, -1, 1, true);
                std::vector<float> v(g.data().begin(), g.data().end());
                for (std::size_t i = 0; i < v.size(); ++i) {
                    const std::size_t y = (i / scale) % scale, x = i % scale;
                    v[i] += (x + y) % 2 == 0 ? 0.05f : -0.05f;
                }
                d_taps.set(scale, Tensor::from_data(g.shape(), std::move(v)));
                g_taps.set(scale, g);
                g_inputs.push_back(g);
            }
            cases.push_back({"hfa_loss", [=] { return gan::hfa_loss(d_taps, g_taps).total; }, g_inputs, 1e-2f});
        }
        {
            auto f = uniform({2, 2, 4, 4}, rng, -1, 1, true);
            cases.push_back({"fsc_apply", [=] { return project(gan::fsc_apply(f), 8); }, {f}, 1e-2f});
        }

        double worst = 0.0;
        std::string worst_op, failures;
        for (auto& c : cases) {
            GradcheckOptions opt;
            opt.step = c.step;
            const double e = gradcheck(c.loss, c.inputs, opt).worst();
            if (e >= worst) worst = e, worst_op = c.op;
            if (!(e < kGradTol)) failures += std::string(failures.empty() ? "" : ",") + c.op;
        }
        r.passed = failures.empty();
        r.detail = fmt("ops=%.0f max_rel_error=%.3g", static_cast<double>(cases.size()), worst) + " worst_op=" + worst_op;
        if (!failures.empty()) r.detail += " failed=" + failures;
    });
}

SuiteResult adjoint(int cases, std::uint64_t seed) {
    return timed("adjoint", [&](SuiteResult& r) {
        Rng rng(seed);
        double worst = 0.0;
        for (int i = 0; i < cases; ++i) {
            const int groups = rng.uniform_int(1, 2);
            const int cin = groups * rng.uniform_int(1, 3), cout = groups * rng.uniform_int(1, 3);
            const int k = rng.uniform_int(1, 4), stride = rng.uniform_int(1, 3);
            const int ho = rng.uniform_int(1, 6), wo = rng.uniform_int(1, 6);
            const int n = rng.uniform_int(1, 3);
            const Shape xs{n, cin, (ho - 1) * stride + k, (wo - 1) * stride + k};
            const Tensor x = uniform(xs, rng);
            const Tensor w = uniform({cout, cin / groups, k, k}, rng);
            const Tensor y = uniform({n, cout, ho, wo}, rng);
            const double lhs = dot(ops::conv2d(x, w, std::nullopt, stride, 0, groups).data(), y.data());
            // conv2d_transpose takes the forward conv's weight viewed with in/out swapped per group.
            const Tensor xt = ops::conv2d_transpose(y, w, stride, groups);
            const double rhs = dot(x.data(), xt.data());
            const double scale = std::max({std::fabs(lhs), std::fabs(rhs), 1e-12});
            worst = std::max(worst, std::fabs(lhs - rhs) / scale);
        }
        r.passed = worst < kAdjointTol;
        r.detail = fmt("cases=%.0f max_rel_error=%.3g", cases, worst);
    });
}

SuiteResult analytic_wavelet() {
    return timed("analytic-wavelet", [&](SuiteResult& r) {
        double worst = 0.0;
        auto track = [&](const Tensor& t, float expect) {
            for (float v : t.data()) worst = std::max(worst, std::fabs(static_cast<double>(v) - expect));
        };
        for (float c : {0.75f, -0.5f, 0.125f}) {
            const auto b = wavelet::wave_pool(Tensor::full({2, 3, 8, 8}, c));
            track(b.ll, 2 * c);
            track(b.lh, 0);
            track(b.hl, 0);
            track(b.hh, 0);
        }
        const float a = 0.25f, bval = -0.75f;
        std::vector<float> v(2 * 3 * 8 * 8);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = (((i / 8) % 8 + i % 8) % 2 == 0) ? a : bval;
        const auto b = wavelet::wave_pool(Tensor::from_data({2, 3, 8, 8}, std::move(v)));
        track(b.lh, 0);
        track(b.hl, 0);
        track(b.hh, a - bval);
        r.passed = worst <= kAnalyticTol;
        r.detail = fmt("max_abs_error=%.3g", worst);
    });
}

SuiteResult baseline_equivalence(const train::TrainConfig& config, int steps, std::vector<gan::LossReport>* reports) {
    return timed("baseline-equivalence", [&](SuiteResult& r) {
        train::TrainConfig c = config;
        c.ablation = {false, false, false};
        c.out_dir.clear();
        train::Trainer trainer(c);
        const auto expected = reference::run_hinge_gan(c, steps);
        int mismatch = -1;
        for (int i = 0; i < steps && mismatch < 0; ++i) {
            const auto got = trainer.step();
            if (reports) reports->push_back(got);
            const auto& e = expected[static_cast<std::size_t>(i)];
            if (std::bit_cast<std::uint32_t>(got.l_d) != std::bit_cast<std::uint32_t>(e.l_d) ||
                std::bit_cast<std::uint32_t>(got.l_g) != std::bit_cast<std::uint32_t>(e.l_g) ||
                std::bit_cast<std::uint32_t>(got.l_recons) != std::bit_cast<std::uint32_t>(e.l_recons)) {
                mismatch = i;
                r.detail = "first mismatch at step " + std::to_string(i + 1) +
                           fmt(": l_d %.9g vs %.9g", got.l_d, e.l_d) + fmt(", l_g %.9g vs %.9g", got.l_g, e.l_g);
            }
        }
        r.passed = mismatch < 0;
        if (r.passed) r.detail = "steps=" + std::to_string(steps) + " bit_exact=1";
    });
}

}  // namespace fregan::checks
