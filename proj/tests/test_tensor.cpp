#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "fregan/gradcheck.hpp"
#include "fregan/ops.hpp"
#include "test_util.hpp"

using namespace fregan;
using fregan::testing::inner;
using fregan::testing::max_abs_diff;
using fregan::testing::random_away_from_zero;
using fregan::testing::random_tensor;
using fregan::testing::reference_conv2d;

namespace {

const std::vector<float> kHaarLL{0.5f, 0.5f, 0.5f, 0.5f};

Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
    // Random projection so every output element carries a distinct weight.
    // Small weights keep the f32 loss value, and so its rounding, near 1e-1.
    return ops::sum_all(ops::mul(t, random_tensor(t.shape(), seed, false, -0.1f, 0.1f)));
}

}  // namespace

TEST_CASE("conv2d: Haar LL on a 2x2 block") {
    auto x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto w = Tensor::from_data({1, 1, 2, 2}, kHaarLL);
    auto y = ops::conv2d(x, w, std::nullopt, 2, 0, 1);
    REQUIRE(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.item() == 5.0f);
}

TEST_CASE("conv2d: 1x1 unit kernel is the identity") {
    auto x = random_tensor({2, 1, 5, 3}, 3);
    auto w = Tensor::full({1, 1, 1, 1}, 1.0f);
    auto y = ops::conv2d(x, w);
    CHECK(max_abs_diff(y.data(), x.data()) == 0.0);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    struct Case {
        Shape x, w;
        int stride, pad, groups;
        bool bias;
    };
    const Case cases[] = {
        {{2, 3, 8, 8}, {4, 3, 3, 3}, 1, 1, 1, false},
        {{2, 3, 8, 8}, {4, 3, 3, 3}, 1, 1, 1, true},
        {{2, 4, 9, 7}, {6, 2, 3, 3}, 2, 1, 2, true},
        {{1, 3, 8, 8}, {3, 1, 2, 2}, 2, 0, 3, false},
        {{3, 5, 4, 4}, {2, 5, 4, 4}, 1, 0, 1, true},
        {{2, 8, 6, 6}, {16, 8, 1, 1}, 1, 0, 1, false},
    };
    std::uint64_t seed = 10;
    for (const auto& c : cases) {
        auto x = random_tensor(c.x, seed++);
        auto w = random_tensor(c.w, seed++);
        std::optional<Tensor> b;
        std::vector<float> bv;
        if (c.bias) {
            b = random_tensor({1, c.w.n, 1, 1}, seed++);
            bv.assign(b->data().begin(), b->data().end());
        }
        auto y = ops::conv2d(x, w, b, c.stride, c.pad, c.groups);
        auto ref = reference_conv2d(x, w, c.bias ? &bv : nullptr, c.stride, c.pad, c.groups);
        REQUIRE(y.numel() == ref.size());
        double err = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) err = std::max(err, std::fabs(y.data()[i] - ref[i]));
        CHECK(err < 1e-5);
    }
}

TEST_CASE("conv2d rejects malformed shapes") {
    auto x = random_tensor({1, 3, 4, 4}, 1);
    CHECK_THROWS_AS(ops::conv2d(x, random_tensor({4, 2, 3, 3}, 2)), std::invalid_argument);
    CHECK_THROWS_AS(ops::conv2d(x, random_tensor({4, 1, 3, 3}, 2), std::nullopt, 1, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS(ops::conv2d(x, random_tensor({4, 3, 5, 5}, 2)), std::invalid_argument);
    CHECK_THROWS_AS(ops::conv2d(x, random_tensor({4, 3, 3, 3}, 2), random_tensor({1, 3, 1, 1}, 3)),
                    std::invalid_argument);
    try {
        ops::conv2d(x, random_tensor({4, 1, 3, 3}, 2), std::nullopt, 1, 0, 2);
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("groups") != std::string::npos);
    }
}

TEST_CASE("conv2d_transpose: scaled LL kernel") {
    auto x = Tensor::from_data({1, 1, 1, 1}, {2});
    auto w = Tensor::from_data({1, 1, 2, 2}, kHaarLL);
    auto y = ops::conv2d_transpose(x, w, 2, 1);
    REQUIRE(y.shape() == Shape{1, 1, 2, 2});
    for (float v : y.data()) CHECK(v == 1.0f);
}

TEST_CASE("conv2d_transpose: zero in, zero out") {
    auto y = ops::conv2d_transpose(Tensor::zeros({2, 4, 3, 3}), random_tensor({4, 3, 3, 3}, 5), 2, 1);
    CHECK(y.shape() == Shape{2, 3, 7, 7});
    for (float v : y.data()) CHECK(v == 0.0f);
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
    Rng pick(77);
    for (int trial = 0; trial < 50; ++trial) {
        const int groups = pick.uniform_int(1, 2);
        const int cin = groups * pick.uniform_int(1, 3);
        const int cout = groups * pick.uniform_int(1, 3);
        const int k = pick.uniform_int(1, 4);
        const int stride = pick.uniform_int(1, 3);
        const int hin = pick.uniform_int(1, 4);
        const int win = pick.uniform_int(1, 4);
        // The transpose output fixes the conv input size.
        const Shape y_shape{2, cout, hin, win};
        const Shape x_shape{2, cin, (hin - 1) * stride + k, (win - 1) * stride + k};
        auto x = random_tensor(x_shape, 1000 + trial);
        auto y = random_tensor(y_shape, 2000 + trial);
        auto w = random_tensor({cout, cin / groups, k, k}, 3000 + trial);
        const double lhs = inner(ops::conv2d(x, w, std::nullopt, stride, 0, groups).data(), y.data());
        const double rhs = inner(x.data(), ops::conv2d_transpose(y, w, stride, groups).data());
        CHECK(std::fabs(lhs - rhs) <= 1e-4 * std::max(1.0, std::fabs(lhs)));
    }
}

TEST_CASE("conv2d is linear in its input") {
    auto x = random_tensor({2, 3, 6, 6}, 1);
    auto z = random_tensor({2, 3, 6, 6}, 2);
    auto w = random_tensor({4, 3, 3, 3}, 3);
    const float alpha = 0.7f, beta = -1.3f;
    auto lhs = ops::conv2d(ops::add(ops::scale(x, alpha), ops::scale(z, beta)), w, std::nullopt, 1, 1);
    auto rhs = ops::add(ops::scale(ops::conv2d(x, w, std::nullopt, 1, 1), alpha),
                        ops::scale(ops::conv2d(z, w, std::nullopt, 1, 1), beta));
    CHECK(max_abs_diff(lhs.data(), rhs.data()) < 1e-5);
}

TEST_CASE("conv gradients match finite differences") {
    auto x = random_tensor({2, 2, 5, 5}, 11, true);
    auto w = random_tensor({3, 2, 3, 3}, 12, true, -0.5f, 0.5f);
    auto b = random_tensor({1, 3, 1, 1}, 13, true);
    auto report = gradcheck([&] { return weighted_sum(ops::conv2d(x, w, b, 2, 1, 1), 14); }, {x, w, b});
    CHECK(report.worst() < 1e-3);

    auto y = random_tensor({2, 4, 3, 3}, 15, true);
    auto wt = random_tensor({4, 1, 2, 2}, 16, true);
    auto report_t = gradcheck([&] { return weighted_sum(ops::conv2d_transpose(y, wt, 2, 2), 17); }, {y, wt});
    CHECK(report_t.worst() < 1e-3);
}

TEST_CASE("elementwise values") {
    auto x = Tensor::from_data({1, 1, 1, 3}, {-1, 0, 2});
    auto y = ops::leaky_relu(x, 0.2f);
    CHECK(y.data()[0] == doctest::Approx(-0.2f));
    CHECK(y.data()[1] == 0.0f);
    CHECK(y.data()[2] == 2.0f);

    auto r = random_tensor({2, 3, 4, 4}, 4);
    CHECK(max_abs_diff(ops::add(r, Tensor::zeros(r.shape())).data(), r.data()) == 0.0);
    CHECK_THROWS_AS(ops::add(r, Tensor::zeros({1, 3, 4, 4})), std::invalid_argument);
    CHECK_THROWS_AS(ops::sub(r, Tensor::zeros({2, 3, 4, 5})), std::invalid_argument);
}

TEST_CASE("elementwise gradients") {
    auto x = random_tensor({1, 2, 3, 3}, 21, true, -2.0f, 2.0f);
    CHECK(gradcheck([&] { return weighted_sum(ops::tanh(x), 22); }, {x}).worst() < 1e-3);

    auto a = random_away_from_zero({1, 2, 3, 3}, 23, 1e-2f);
    CHECK(gradcheck([&] { return weighted_sum(ops::leaky_relu(a, 0.2f), 24); }, {a}).worst() < 1e-3);

    auto p = random_tensor({1, 2, 3, 3}, 25, true);
    auto q = random_tensor({1, 2, 3, 3}, 26, true);
    CHECK(gradcheck([&] { return weighted_sum(ops::sub(ops::mul(p, q), ops::scale(p, 0.3f)), 27); }, {p, q}).worst() <
          1e-3);
}

TEST_CASE("leaky_relu subgradient at zero is one") {
    auto x = Tensor::from_data({1, 1, 1, 1}, {0.0f}, true);
    backward(ops::sum_all(ops::leaky_relu(x, 0.2f)));
    CHECK(x.grad()[0] == 1.0f);
}

TEST_CASE("batch_norm2d normalizes per channel") {
    Rng rng(5);
    std::vector<float> v(2 * 3 * 4 * 4);
    for (auto& e : v) e = static_cast<float>(5.0 + 2.0 * rng.normal());
    auto x = Tensor::from_data({2, 3, 4, 4}, v);
    auto y = ops::batch_norm2d(x, Tensor::full({1, 3, 1, 1}, 1.0f), Tensor::zeros({1, 3, 1, 1}), 1e-5f);
    for (int c = 0; c < 3; ++c) {
        double s = 0, sq = 0;
        for (int n = 0; n < 2; ++n)
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    s += y.at(n, c, i, j);
                    sq += static_cast<double>(y.at(n, c, i, j)) * y.at(n, c, i, j);
                }
        const double mean = s / 32.0;
        CHECK(std::fabs(mean) < 1e-5);
        CHECK(std::fabs(sq / 32.0 - mean * mean - 1.0) < 1e-3);
    }

    auto beta = Tensor::from_data({1, 3, 1, 1}, {0.5f, -1.0f, 2.0f});
    auto z = ops::batch_norm2d(x, Tensor::zeros({1, 3, 1, 1}), beta, 1e-5f);
    for (int c = 0; c < 3; ++c) CHECK(z.at(1, c, 2, 3) == beta.data()[c]);

    CHECK_THROWS_AS(ops::batch_norm2d(Tensor::zeros({1, 2, 1, 1}), Tensor::zeros({1, 2, 1, 1}),
                                      Tensor::zeros({1, 2, 1, 1})),
                    std::invalid_argument);
}

TEST_CASE("batch_norm2d gradients") {
    auto x = random_tensor({2, 2, 3, 3}, 31, true);
    auto gamma = random_tensor({1, 2, 1, 1}, 32, true, 0.5f, 1.5f);
    auto beta = random_tensor({1, 2, 1, 1}, 33, true);
    auto report = gradcheck([&] { return weighted_sum(ops::batch_norm2d(x, gamma, beta, 1e-5f), 34); },
                            {x, gamma, beta});
    CHECK(report.worst() < 1e-3);
}

TEST_CASE("upsample_nearest2") {
    auto x = Tensor::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
    auto y = ops::upsample_nearest2(x);
    const std::vector<float> expected{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(std::vector<float>(y.data().begin(), y.data().end()) == expected);

    auto c = ops::upsample_nearest2(Tensor::full({2, 3, 3, 5}, 1.5f));
    CHECK(c.shape() == Shape{2, 3, 6, 10});
    for (float v : c.data()) CHECK(v == 1.5f);

    auto g = random_tensor({1, 2, 3, 3}, 41, true);
    CHECK(gradcheck([&] { return weighted_sum(ops::upsample_nearest2(g), 42); }, {g}).worst() < 1e-3);
}

TEST_CASE("reductions") {
    auto x = random_tensor({2, 3, 2, 2}, 50);
    CHECK(ops::l1_distance(x, x).item() == 0.0f);
    auto a = Tensor::from_data({1, 1, 1, 2}, {1, 2});
    auto b = Tensor::from_data({1, 1, 1, 2}, {2, 4});
    CHECK(ops::l1_distance(a, b).item() == doctest::Approx(1.5));
    CHECK_THROWS_AS(ops::l1_distance(a, x), std::invalid_argument);

    auto cm = ops::channel_mean(x);
    CHECK(cm.shape() == Shape{2, 1, 2, 2});
    CHECK(cm.at(1, 0, 1, 0) == doctest::Approx((x.at(1, 0, 1, 0) + x.at(1, 1, 1, 0) + x.at(1, 2, 1, 0)) / 3.0f));
    auto sm = ops::sample_mean(x);
    CHECK(sm.shape() == Shape{2, 1, 1, 1});

    auto p = random_tensor({2, 3, 2, 2}, 51, true);
    auto q = random_tensor({2, 3, 2, 2}, 52, true);
    // Keep |p - q| away from the L1 kink.
    for (std::size_t i = 0; i < p.numel(); ++i) {
        if (std::fabs(p.data()[i] - q.data()[i]) < 0.1f) p.mutable_data()[i] = q.data()[i] + 0.2f;
    }
    CHECK(gradcheck([&] { return ops::l1_distance(p, q); }, {p, q}).worst() < 1e-3);
    CHECK(gradcheck([&] { return weighted_sum(ops::channel_mean(p), 53); }, {p}).worst() < 1e-3);
    CHECK(gradcheck([&] { return weighted_sum(ops::sample_mean(p), 54); }, {p}).worst() < 1e-3);
    auto r = random_away_from_zero({2, 1, 1, 3}, 55, 1e-2f);
    CHECK(gradcheck([&] { return ops::relu_mean(r); }, {r}).worst() < 1e-3);
    CHECK(gradcheck([&] { return ops::mean_all(ops::avg_pool(p, 2)); }, {p}).worst() < 1e-3);
}

TEST_CASE("backward basics") {
    auto x = random_tensor({2, 2, 3, 3}, 60, true);
    backward(ops::sum_all(x));
    for (float g : x.grad()) CHECK(g == 1.0f);

    x.zero_grad();
    backward(ops::mean_all(ops::mul(x, x)));
    const float n = static_cast<float>(x.numel());
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == doctest::Approx(2.0f * x.data()[i] / n));

    // Repeated calls accumulate into leaves.
    x.zero_grad();
    auto loss = ops::sum_all(ops::scale(x, 2.0f));
    backward(loss);
    backward(loss);
    for (float g : x.grad()) CHECK(g == 4.0f);

    CHECK_THROWS_AS(backward(ops::scale(x, 1.0f)), std::invalid_argument);
}

TEST_CASE("composite graph gradients") {
    auto x = random_tensor({2, 2, 6, 6}, 70, true);
    auto w = random_tensor({3, 2, 3, 3}, 71, true, -0.5f, 0.5f);
    auto gamma = random_tensor({1, 3, 1, 1}, 72, true, 0.5f, 1.5f);
    auto beta = random_tensor({1, 3, 1, 1}, 73, true, -0.2f, 0.2f);
    auto f = [&] {
        auto h = ops::batch_norm2d(ops::conv2d(x, w, std::nullopt, 1, 1), gamma, beta, 1e-5f);
        return ops::mean_all(ops::mul(ops::leaky_relu(h, 0.2f), random_tensor(h.shape(), 74, false, 0.5f, 1.5f)));
    };
    // Pre-activations must stay clear of the leaky_relu kink.
    auto pre = ops::batch_norm2d(ops::conv2d(x, w, std::nullopt, 1, 1), gamma, beta, 1e-5f);
    double closest = 1e9;
    for (float v : pre.data()) closest = std::min(closest, static_cast<double>(std::fabs(v)));
    REQUIRE(closest > 1e-2);
    CHECK(gradcheck(f, {x, w, gamma, beta}).worst() < 1e-3);
}

TEST_CASE("gradcheck of a plain sum is exact") {
    auto x = random_tensor({1, 1, 3, 3}, 80, true);
    auto report = gradcheck([&] { return ops::sum_all(x); }, {x});
    CHECK(report.worst() <= 1e-6);
}

TEST_CASE("tape visits each node once in topological order") {
    auto x = random_tensor({1, 1, 2, 2}, 90, true);
    auto a = ops::scale(x, 2.0f);
    auto b = ops::add(a, a);  // diamond
    auto loss = ops::sum_all(ops::mul(b, x));
    Tape tape = record_tape(loss);
    std::set<const detail::Node*> seen(tape.order.begin(), tape.order.end());
    CHECK(seen.size() == tape.order.size());
    CHECK(tape.order.size() == 5);
    CHECK(tape.order.back() == loss.node().get());
    for (std::size_t i = 0; i < tape.order.size(); ++i) {
        for (const auto& in : tape.order[i]->inputs) {
            auto pos = std::find(tape.order.begin(), tape.order.end(), in.get());
            CHECK(pos - tape.order.begin() < static_cast<long>(i));
        }
    }
    backward(loss);
    // d/dx sum(4x * x) = 8x
    for (std::size_t i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(8.0f * x.data()[i]));
}

TEST_CASE("forward and backward are deterministic") {
    auto run = [] {
        auto x = random_tensor({2, 3, 8, 8}, 100, true);
        auto w = random_tensor({4, 3, 3, 3}, 101, true);
        auto y = ops::leaky_relu(ops::conv2d(x, w, std::nullopt, 2, 1), 0.2f);
        auto loss = ops::mean_all(ops::mul(y, y));
        backward(loss);
        std::vector<float> out(y.data().begin(), y.data().end());
        out.insert(out.end(), w.grad().begin(), w.grad().end());
        out.insert(out.end(), x.grad().begin(), x.grad().end());
        return out;
    };
    CHECK(run() == run());
}

TEST_CASE("detach shares values but stops gradients") {
    auto x = random_tensor({1, 1, 2, 2}, 110, true);
    auto d = ops::scale(x, 3.0f).detach();
    CHECK_FALSE(d.requires_grad());
    auto loss = ops::sum_all(ops::add(ops::scale(x, 1.0f), d));
    backward(loss);
    for (float g : x.grad()) CHECK(g == 1.0f);
}
