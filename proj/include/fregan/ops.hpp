#pragma once
// Differentiable operations over Tensor. Shape violations throw
// std::invalid_argument with the offending dimensions in the message.

#include <optional>

#include "fregan/tensor.hpp"

namespace fregan::ops {

// Cross-correlation. weight: (Cout, Cin/groups, kH, kW); bias: Cout values.
Tensor conv2d(const Tensor& input, const Tensor& weight, const std::optional<Tensor>& bias = std::nullopt,
              int stride = 1, int padding = 0, int groups = 1);

// Exact adjoint of conv2d(·, weight, stride, padding 0, groups).
// weight: (Cin, Cout/groups, kH, kW) in conv2d's layout; output has
// weight.c * groups channels and spatial size (H-1)*stride + kH.
Tensor conv2d_transpose(const Tensor& input, const Tensor& weight, int stride = 1, int groups = 1);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);
Tensor leaky_relu(const Tensor& a, float slope);
Tensor tanh(const Tensor& a);

// Training-mode batch normalization; gamma and beta hold C values.
Tensor batch_norm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

Tensor upsample_nearest2(const Tensor& input);
// Box-filter downsample by an integer factor.
Tensor avg_pool(const Tensor& input, int factor);

Tensor mean_all(const Tensor& a);
Tensor sum_all(const Tensor& a);
// Mean over channels: N×1×H×W.
Tensor channel_mean(const Tensor& a);
// Mean over C, H, W: N×1×1×1.
Tensor sample_mean(const Tensor& a);
// Mean absolute difference over all elements.
Tensor l1_distance(const Tensor& a, const Tensor& b);
// mean(max(0, a)); the subgradient at 0 is 1.
Tensor relu_mean(const Tensor& a);

}  // namespace fregan::ops
