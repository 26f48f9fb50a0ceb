#include "fregan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>

#include "fregan/kernels.hpp"

namespace fregan::ops {

using detail::Node;

namespace {

Tensor make_result(Shape shape, std::vector<float> values, std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward_fn) {
    Tensor out = Tensor::from_data(shape, std::move(values));
    bool tracked = false;
    for (const Tensor* in : inputs) tracked = tracked || in->requires_grad();
    if (tracked) {
        Node& node = *out.node();
        node.requires_grad = true;
        for (const Tensor* in : inputs) node.inputs.push_back(in->node());
        node.backward_fn = std::move(backward_fn);
    }
    return out;
}

[[noreturn]] void shape_error(const std::string& op, const std::string& what) {
    throw std::invalid_argument(op + ": " + what);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        shape_error(op, "shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
}

// Grad buffer of input i, or nullptr when that input is not tracked.
float* input_grad(Node& node, std::size_t i) {
    Node& in = *node.inputs[i];
    return in.requires_grad ? in.grad_buffer().data() : nullptr;
}

// ---------------------------------------------------------------------------
// Convolution machinery shared by conv2d and conv2d_transpose.

struct ConvGeom {
    int batch, cin, h, w;    // convolution input
    int cout, kh, kw;        // weight
    int stride, pad, groups;
    int ho, wo;              // convolution output

    int cin_g() const { return cin / groups; }
    int cout_g() const { return cout / groups; }
    std::size_t kg() const { return static_cast<std::size_t>(cin_g()) * kh * kw; }
    std::size_t in_plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t out_plane() const { return static_cast<std::size_t>(ho) * wo; }
    bool direct() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// Output columns [lo, hi) whose input column ox*stride - pad + kj is in range.
std::pair<int, int> valid_columns(const ConvGeom& g, int kj) {
    const int off = g.pad - kj;
    int lo = off > 0 ? (off + g.stride - 1) / g.stride : 0;
    const int last = g.w - 1 + off;
    int hi = last < 0 ? 0 : last / g.stride + 1;
    lo = std::min(lo, g.wo);
    hi = std::clamp(hi, lo, g.wo);
    return {lo, hi};
}

void im2col(const ConvGeom& g, const float* x, float* col) {
    const std::size_t p = g.out_plane();
    for (int c = 0; c < g.cin_g(); ++c) {
        const float* xc = x + c * g.in_plane();
        for (int ki = 0; ki < g.kh; ++ki) {
            for (int kj = 0; kj < g.kw; ++kj) {
                float* row = col + ((static_cast<std::size_t>(c) * g.kh + ki) * g.kw + kj) * p;
                const auto [lo, hi] = valid_columns(g, kj);
                for (int oy = 0; oy < g.ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ki;
                    float* dst = row + static_cast<std::size_t>(oy) * g.wo;
                    if (iy < 0 || iy >= g.h) {
                        std::fill(dst, dst + g.wo, 0.0f);
                        continue;
                    }
                    const float* src = xc + static_cast<std::size_t>(iy) * g.w;
                    const int off = kj - g.pad;
                    std::fill(dst, dst + lo, 0.0f);
                    if (g.stride == 1) {
                        std::copy(src + lo + off, src + hi + off, dst + lo);
                    } else {
                        for (int ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride + off];
                    }
                    std::fill(dst + hi, dst + g.wo, 0.0f);
                }
            }
        }
    }
}

void col2im_add(const ConvGeom& g, const float* col, float* x) {
    const std::size_t p = g.out_plane();
    for (int c = 0; c < g.cin_g(); ++c) {
        float* xc = x + c * g.in_plane();
        for (int ki = 0; ki < g.kh; ++ki) {
            for (int kj = 0; kj < g.kw; ++kj) {
                const float* row = col + ((static_cast<std::size_t>(c) * g.kh + ki) * g.kw + kj) * p;
                const auto [lo, hi] = valid_columns(g, kj);
                for (int oy = 0; oy < g.ho; ++oy) {
                    const int iy = oy * g.stride - g.pad + ki;
                    if (iy < 0 || iy >= g.h) continue;
                    const float* src = row + static_cast<std::size_t>(oy) * g.wo;
                    float* dst = xc + static_cast<std::size_t>(iy) * g.w;
                    const int off = kj - g.pad;
                    if (g.stride == 1) {
                        for (int ox = lo; ox < hi; ++ox) dst[ox + off] += src[ox];
                    } else {
                        for (int ox = lo; ox < hi; ++ox) dst[ox * g.stride + off] += src[ox];
                    }
                }
            }
        }
    }
}

// y = W * im2col(x) for every sample and group.
void conv_forward(const ConvGeom& g, const float* x, const float* w, float* y, bool accumulate) {
    const auto& k = kernels::active();
    std::vector<float> col(g.direct() ? 0 : g.kg() * g.out_plane());
    for (int n = 0; n < g.batch; ++n) {
        for (int grp = 0; grp < g.groups; ++grp) {
            const float* xg = x + (static_cast<std::size_t>(n) * g.cin + grp * g.cin_g()) * g.in_plane();
            float* yg = y + (static_cast<std::size_t>(n) * g.cout + grp * g.cout_g()) * g.out_plane();
            const float* wg = w + static_cast<std::size_t>(grp) * g.cout_g() * g.kg();
            const float* b = xg;
            if (!g.direct()) {
                im2col(g, xg, col.data());
                b = col.data();
            }
            k.gemm_nn(g.cout_g(), g.out_plane(), g.kg(), wg, g.kg(), b, g.out_plane(), yg, g.out_plane(),
                      accumulate);
        }
    }
}

// dx += col2im(W^T * dy)
void conv_backward_input(const ConvGeom& g, const float* w, const float* dy, float* dx) {
    const auto& k = kernels::active();
    const std::size_t kg = g.kg();
    const std::size_t p = g.out_plane();
    std::vector<float> wt(kg * g.cout_g());
    std::vector<float> col(kg * p);
    for (int grp = 0; grp < g.groups; ++grp) {
        const float* wg = w + static_cast<std::size_t>(grp) * g.cout_g() * kg;
        for (int o = 0; o < g.cout_g(); ++o) {
            for (std::size_t r = 0; r < kg; ++r) wt[r * g.cout_g() + o] = wg[o * kg + r];
        }
        for (int n = 0; n < g.batch; ++n) {
            const float* dyg = dy + (static_cast<std::size_t>(n) * g.cout + grp * g.cout_g()) * p;
            float* dxg = dx + (static_cast<std::size_t>(n) * g.cin + grp * g.cin_g()) * g.in_plane();
            if (g.direct()) {
                k.gemm_nn(kg, p, g.cout_g(), wt.data(), g.cout_g(), dyg, p, dxg, p, true);
            } else {
                k.gemm_nn(kg, p, g.cout_g(), wt.data(), g.cout_g(), dyg, p, col.data(), p, false);
                col2im_add(g, col.data(), dxg);
            }
        }
    }
}

// dw += dy * im2col(x)^T
void conv_backward_weight(const ConvGeom& g, const float* x, const float* dy, float* dw) {
    const auto& k = kernels::active();
    const std::size_t kg = g.kg();
    const std::size_t p = g.out_plane();
    std::vector<float> col(g.direct() ? 0 : kg * p);
    for (int n = 0; n < g.batch; ++n) {
        for (int grp = 0; grp < g.groups; ++grp) {
            const float* xg = x + (static_cast<std::size_t>(n) * g.cin + grp * g.cin_g()) * g.in_plane();
            const float* dyg = dy + (static_cast<std::size_t>(n) * g.cout + grp * g.cout_g()) * p;
            float* dwg = dw + static_cast<std::size_t>(grp) * g.cout_g() * kg;
            const float* b = xg;
            if (!g.direct()) {
                im2col(g, xg, col.data());
                b = col.data();
            }
            k.gemm_nt(g.cout_g(), kg, p, dyg, p, b, p, dwg, kg, true);
        }
    }
}

void check_groups(const char* op, int channels_in, int channels_out, int groups) {
    if (groups < 1) shape_error(op, "groups must be >= 1, got " + std::to_string(groups));
    if (channels_in % groups != 0) {
        shape_error(op, "groups " + std::to_string(groups) + " does not divide " + std::to_string(channels_in) +
                            " input channels");
    }
    if (channels_out % groups != 0) {
        shape_error(op, "groups " + std::to_string(groups) + " does not divide " + std::to_string(channels_out) +
                            " output channels");
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const std::optional<Tensor>& bias, int stride,
              int padding, int groups) {
    const Shape& xs = input.shape();
    const Shape& ws = weight.shape();
    if (stride < 1) shape_error("conv2d", "stride must be >= 1");
    if (padding < 0) shape_error("conv2d", "padding must be >= 0");
    check_groups("conv2d", xs.c, ws.n, groups);
    if (ws.c * groups != xs.c) {
        shape_error("conv2d", "weight " + ws.str() + " with groups " + std::to_string(groups) +
                                  " expects " + std::to_string(ws.c * groups) + " input channels, input is " +
                                  xs.str());
    }
    if (xs.h + 2 * padding < ws.h || xs.w + 2 * padding < ws.w) {
        shape_error("conv2d", "padded input " + std::to_string(xs.h + 2 * padding) + "x" +
                                  std::to_string(xs.w + 2 * padding) + " smaller than kernel " +
                                  std::to_string(ws.h) + "x" + std::to_string(ws.w));
    }
    if (bias && bias->numel() != static_cast<std::size_t>(ws.n)) {
        shape_error("conv2d", "bias has " + std::to_string(bias->numel()) + " values for " + std::to_string(ws.n) +
                                  " output channels");
    }

    ConvGeom g{xs.n, xs.c, xs.h, xs.w, ws.n, ws.h, ws.w, stride, padding, groups, 0, 0};
    g.ho = (xs.h + 2 * padding - ws.h) / stride + 1;
    g.wo = (xs.w + 2 * padding - ws.w) / stride + 1;
    const Shape out_shape{xs.n, ws.n, g.ho, g.wo};

    std::vector<float> y(out_shape.numel());
    conv_forward(g, input.data().data(), weight.data().data(), y.data(), false);
    if (bias) {
        const auto bv = bias->data();
        for (int n = 0; n < g.batch; ++n) {
            for (int o = 0; o < g.cout; ++o) {
                float* dst = y.data() + (static_cast<std::size_t>(n) * g.cout + o) * g.out_plane();
                std::for_each(dst, dst + g.out_plane(), [v = bv[o]](float& e) { e += v; });
            }
        }
    }

    auto backward_fn = [g, has_bias = bias.has_value()](Node& self) {
        const float* dy = self.grad.data();
        const Node& x = *self.inputs[0];
        const Node& w = *self.inputs[1];
        if (float* dx = input_grad(self, 0)) conv_backward_input(g, w.values(), dy, dx);
        if (float* dw = input_grad(self, 1)) conv_backward_weight(g, x.values(), dy, dw);
        if (has_bias) {
            if (float* db = input_grad(self, 2)) {
                for (int n = 0; n < g.batch; ++n) {
                    for (int o = 0; o < g.cout; ++o) {
                        const float* src = dy + (static_cast<std::size_t>(n) * g.cout + o) * g.out_plane();
                        double acc = 0.0;
                        for (std::size_t i = 0; i < g.out_plane(); ++i) acc += src[i];
                        db[o] += static_cast<float>(acc);
                    }
                }
            }
        }
    };
    if (bias) return make_result(out_shape, std::move(y), {&input, &weight, &*bias}, backward_fn);
    return make_result(out_shape, std::move(y), {&input, &weight}, backward_fn);
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& weight, int stride, int groups) {
    const Shape& xs = input.shape();
    const Shape& ws = weight.shape();
    if (stride < 1) shape_error("conv2d_transpose", "stride must be >= 1");
    check_groups("conv2d_transpose", ws.n, ws.c * groups, groups);
    if (xs.c != ws.n) {
        shape_error("conv2d_transpose", "weight " + ws.str() + " expects " + std::to_string(ws.n) +
                                            " input channels, input is " + xs.str());
    }
    if (xs.h < 1 || xs.w < 1) shape_error("conv2d_transpose", "empty spatial input " + xs.str());

    // Geometry of the forward convolution this operation is the adjoint of.
    const int hout = (xs.h - 1) * stride + ws.h;
    const int wout = (xs.w - 1) * stride + ws.w;
    ConvGeom g{xs.n, ws.c * groups, hout, wout, ws.n, ws.h, ws.w, stride, 0, groups, xs.h, xs.w};
    const Shape out_shape{xs.n, g.cin, hout, wout};

    std::vector<float> y(out_shape.numel(), 0.0f);
    conv_backward_input(g, weight.data().data(), input.data().data(), y.data());

    auto backward_fn = [g](Node& self) {
        const float* dy = self.grad.data();
        const Node& x = *self.inputs[0];
        const Node& w = *self.inputs[1];
        if (float* dx = input_grad(self, 0)) conv_forward(g, dy, w.values(), dx, true);
        if (float* dw = input_grad(self, 1)) conv_backward_weight(g, dy, x.values(), dw);
    };
    return make_result(out_shape, std::move(y), {&input, &weight}, backward_fn);
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<float> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i];
    return make_result(a.shape(), std::move(y), {&a, &b}, [](Node& self) {
        const auto& k = kernels::active();
        for (std::size_t i = 0; i < 2; ++i) {
            if (float* d = input_grad(self, i)) k.axpy(self.grad.size(), 1.0f, self.grad.data(), d);
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<float> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] - bv[i];
    return make_result(a.shape(), std::move(y), {&a, &b}, [](Node& self) {
        const auto& k = kernels::active();
        if (float* d = input_grad(self, 0)) k.axpy(self.grad.size(), 1.0f, self.grad.data(), d);
        if (float* d = input_grad(self, 1)) k.axpy(self.grad.size(), -1.0f, self.grad.data(), d);
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<float> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
    return make_result(a.shape(), std::move(y), {&a, &b}, [](Node& self) {
        const float* av = self.inputs[0]->values();
        const float* bv = self.inputs[1]->values();
        const std::size_t n = self.grad.size();
        if (float* d = input_grad(self, 0)) {
            for (std::size_t i = 0; i < n; ++i) d[i] += self.grad[i] * bv[i];
        }
        if (float* d = input_grad(self, 1)) {
            for (std::size_t i = 0; i < n; ++i) d[i] += self.grad[i] * av[i];
        }
    });
}

Tensor scale(const Tensor& a, float s) {
    const auto av = a.data();
    std::vector<float> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * s;
    return make_result(a.shape(), std::move(y), {&a}, [s](Node& self) {
        if (float* d = input_grad(self, 0)) kernels::active().axpy(self.grad.size(), s, self.grad.data(), d);
    });
}

Tensor add_scalar(const Tensor& a, float s) {
    const auto av = a.data();
    std::vector<float> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + s;
    return make_result(a.shape(), std::move(y), {&a}, [](Node& self) {
        if (float* d = input_grad(self, 0)) kernels::active().axpy(self.grad.size(), 1.0f, self.grad.data(), d);
    });
}

Tensor leaky_relu(const Tensor& a, float slope) {
    const auto av = a.data();
    std::vector<float> y(av.size());
    kernels::active().leaky_relu(y.size(), slope, av.data(), y.data());
    return make_result(a.shape(), std::move(y), {&a}, [slope](Node& self) {
        if (float* d = input_grad(self, 0)) {
            kernels::active().leaky_relu_backward(self.grad.size(), slope, self.inputs[0]->values(),
                                                  self.grad.data(), d);
        }
    });
}

Tensor tanh(const Tensor& a) {
    const auto av = a.data();
    std::vector<float> y(av.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(av[i]);
    auto saved = std::make_shared<std::vector<float>>(y);
    return make_result(a.shape(), std::move(y), {&a}, [saved](Node& self) {
        if (float* d = input_grad(self, 0)) {
            const auto& t = *saved;
            for (std::size_t i = 0; i < t.size(); ++i) d[i] += self.grad[i] * (1.0f - t[i] * t[i]);
        }
    });
}

// ---------------------------------------------------------------------------
// Normalization and resampling

Tensor batch_norm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, float eps) {
    const Shape& s = input.shape();
    const std::size_t m = static_cast<std::size_t>(s.n) * s.plane();
    if (m < 2) {
        shape_error("batch_norm2d", "needs N*H*W >= 2 for batch statistics, input is " + s.str());
    }
    if (gamma.numel() != static_cast<std::size_t>(s.c) || beta.numel() != static_cast<std::size_t>(s.c)) {
        shape_error("batch_norm2d", "gamma/beta need " + std::to_string(s.c) + " values, got " +
                                        std::to_string(gamma.numel()) + "/" + std::to_string(beta.numel()));
    }
    const auto x = input.data();
    const auto gv = gamma.data();
    const auto bv = beta.data();
    const std::size_t plane = s.plane();
    auto xhat = std::make_shared<std::vector<float>>(x.size());
    auto inv_std = std::make_shared<std::vector<float>>(s.c);
    std::vector<float> y(x.size());
    for (int c = 0; c < s.c; ++c) {
        double sum = 0.0;
        for (int n = 0; n < s.n; ++n) {
            const float* src = x.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) sum += src[i];
        }
        const double mean = sum / static_cast<double>(m);
        double sq = 0.0;
        for (int n = 0; n < s.n; ++n) {
            const float* src = x.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double d = src[i] - mean;
                sq += d * d;
            }
        }
        const double istd = 1.0 / std::sqrt(sq / static_cast<double>(m) + eps);
        (*inv_std)[c] = static_cast<float>(istd);
        for (int n = 0; n < s.n; ++n) {
            const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const float xh = static_cast<float>((x[off + i] - mean) * istd);
                (*xhat)[off + i] = xh;
                y[off + i] = gv[c] * xh + bv[c];
            }
        }
    }
    return make_result(s, std::move(y), {&input, &gamma, &beta}, [s, m, xhat, inv_std](Node& self) {
        const std::size_t plane = s.plane();
        const float* gv = self.inputs[1]->values();
        float* dx = input_grad(self, 0);
        float* dgamma = input_grad(self, 1);
        float* dbeta = input_grad(self, 2);
        const float* dy = self.grad.data();
        for (int c = 0; c < s.c; ++c) {
            double sum_dy = 0.0;
            double sum_dy_xhat = 0.0;
            for (int n = 0; n < s.n; ++n) {
                const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_dy += dy[off + i];
                    sum_dy_xhat += static_cast<double>(dy[off + i]) * (*xhat)[off + i];
                }
            }
            if (dbeta) dbeta[c] += static_cast<float>(sum_dy);
            if (dgamma) dgamma[c] += static_cast<float>(sum_dy_xhat);
            if (dx) {
                const double k = gv[c] * (*inv_std)[c] / static_cast<double>(m);
                const double md = static_cast<double>(m);
                for (int n = 0; n < s.n; ++n) {
                    const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        dx[off + i] += static_cast<float>(
                            k * (md * dy[off + i] - sum_dy - (*xhat)[off + i] * sum_dy_xhat));
                    }
                }
            }
        }
    });
}

Tensor upsample_nearest2(const Tensor& input) {
    const Shape& s = input.shape();
    const Shape out{s.n, s.c, s.h * 2, s.w * 2};
    const auto x = input.data();
    std::vector<float> y(out.numel());
    const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t pl = 0; pl < planes; ++pl) {
        const float* src = x.data() + pl * s.plane();
        float* dst = y.data() + pl * out.plane();
        for (int i = 0; i < out.h; ++i) {
            for (int j = 0; j < out.w; ++j) dst[i * out.w + j] = src[(i / 2) * s.w + j / 2];
        }
    }
    return make_result(out, std::move(y), {&input}, [s, out](Node& self) {
        float* dx = input_grad(self, 0);
        if (!dx) return;
        const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
        for (std::size_t pl = 0; pl < planes; ++pl) {
            const float* src = self.grad.data() + pl * out.plane();
            float* dst = dx + pl * s.plane();
            for (int i = 0; i < out.h; ++i) {
                for (int j = 0; j < out.w; ++j) dst[(i / 2) * s.w + j / 2] += src[i * out.w + j];
            }
        }
    });
}

Tensor avg_pool(const Tensor& input, int factor) {
    const Shape& s = input.shape();
    if (factor < 1 || s.h % factor != 0 || s.w % factor != 0) {
        shape_error("avg_pool", "factor " + std::to_string(factor) + " does not divide " + s.str());
    }
    const Shape out{s.n, s.c, s.h / factor, s.w / factor};
    const auto x = input.data();
    std::vector<float> y(out.numel());
    const float inv = 1.0f / static_cast<float>(factor * factor);
    const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t pl = 0; pl < planes; ++pl) {
        const float* src = x.data() + pl * s.plane();
        float* dst = y.data() + pl * out.plane();
        for (int i = 0; i < out.h; ++i) {
            for (int j = 0; j < out.w; ++j) {
                float acc = 0.0f;
                for (int a = 0; a < factor; ++a) {
                    for (int b = 0; b < factor; ++b) acc += src[(i * factor + a) * s.w + j * factor + b];
                }
                dst[i * out.w + j] = acc * inv;
            }
        }
    }
    return make_result(out, std::move(y), {&input}, [s, out, factor, inv](Node& self) {
        float* dx = input_grad(self, 0);
        if (!dx) return;
        const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
        for (std::size_t pl = 0; pl < planes; ++pl) {
            const float* src = self.grad.data() + pl * out.plane();
            float* dst = dx + pl * s.plane();
            for (int i = 0; i < s.h; ++i) {
                for (int j = 0; j < s.w; ++j) dst[i * s.w + j] += src[(i / factor) * out.w + j / factor] * inv;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Reductions (accumulated in double)

Tensor sum_all(const Tensor& a) {
    double acc = 0.0;
    for (float v : a.data()) acc += v;
    return make_result({1, 1, 1, 1}, {static_cast<float>(acc)}, {&a}, [](Node& self) {
        float* d = input_grad(self, 0);
        if (!d) return;
        const float g = self.grad[0];
        const std::size_t n = self.inputs[0]->shape.numel();
        for (std::size_t i = 0; i < n; ++i) d[i] += g;
    });
}

Tensor mean_all(const Tensor& a) {
    const std::size_t n = a.numel();
    if (n == 0) shape_error("mean_all", "empty tensor");
    double acc = 0.0;
    for (float v : a.data()) acc += v;
    return make_result({1, 1, 1, 1}, {static_cast<float>(acc / static_cast<double>(n))}, {&a}, [n](Node& self) {
        float* d = input_grad(self, 0);
        if (!d) return;
        const float g = static_cast<float>(self.grad[0] / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) d[i] += g;
    });
}

Tensor channel_mean(const Tensor& a) {
    const Shape& s = a.shape();
    if (s.c == 0) shape_error("channel_mean", "no channels in " + s.str());
    const Shape out{s.n, 1, s.h, s.w};
    const auto x = a.data();
    const std::size_t plane = s.plane();
    std::vector<float> y(out.numel());
    for (int n = 0; n < s.n; ++n) {
        for (std::size_t i = 0; i < plane; ++i) {
            double acc = 0.0;
            for (int c = 0; c < s.c; ++c) acc += x[(static_cast<std::size_t>(n) * s.c + c) * plane + i];
            y[n * plane + i] = static_cast<float>(acc / s.c);
        }
    }
    return make_result(out, std::move(y), {&a}, [s](Node& self) {
        float* d = input_grad(self, 0);
        if (!d) return;
        const std::size_t plane = s.plane();
        const float inv = 1.0f / static_cast<float>(s.c);
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                float* dst = d + (static_cast<std::size_t>(n) * s.c + c) * plane;
                const float* src = self.grad.data() + n * plane;
                for (std::size_t i = 0; i < plane; ++i) dst[i] += src[i] * inv;
            }
        }
    });
}

Tensor sample_mean(const Tensor& a) {
    const Shape& s = a.shape();
    const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
    if (per == 0) shape_error("sample_mean", "empty samples in " + s.str());
    const auto x = a.data();
    std::vector<float> y(s.n);
    for (int n = 0; n < s.n; ++n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < per; ++i) acc += x[n * per + i];
        y[n] = static_cast<float>(acc / static_cast<double>(per));
    }
    return make_result({s.n, 1, 1, 1}, std::move(y), {&a}, [s, per](Node& self) {
        float* d = input_grad(self, 0);
        if (!d) return;
        for (int n = 0; n < s.n; ++n) {
            const float g = static_cast<float>(self.grad[n] / static_cast<double>(per));
            for (std::size_t i = 0; i < per; ++i) d[n * per + i] += g;
        }
    });
}

Tensor l1_distance(const Tensor& a, const Tensor& b) {
    require_same_shape("l1_distance", a, b);
    const std::size_t n = a.numel();
    if (n == 0) shape_error("l1_distance", "empty tensors");
    const auto av = a.data();
    const auto bv = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(static_cast<double>(av[i]) - bv[i]);
    return make_result({1, 1, 1, 1}, {static_cast<float>(acc / static_cast<double>(n))}, {&a, &b}, [n](Node& self) {
        const float* av = self.inputs[0]->values();
        const float* bv = self.inputs[1]->values();
        const float g = static_cast<float>(self.grad[0] / static_cast<double>(n));
        float* da = input_grad(self, 0);
        float* db = input_grad(self, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const float d = av[i] - bv[i];
            const float sg = d > 0.0f ? g : (d < 0.0f ? -g : 0.0f);
            if (da) da[i] += sg;
            if (db) db[i] -= sg;
        }
    });
}

Tensor relu_mean(const Tensor& a) {
    const std::size_t n = a.numel();
    if (n == 0) shape_error("relu_mean", "empty tensor");
    double acc = 0.0;
    // NaN passes through so divergence stays visible.
    for (float v : a.data()) acc += (v > 0.0f || std::isnan(v)) ? v : 0.0f;
    return make_result({1, 1, 1, 1}, {static_cast<float>(acc / static_cast<double>(n))}, {&a}, [n](Node& self) {
        float* d = input_grad(self, 0);
        if (!d) return;
        const float* x = self.inputs[0]->values();
        const float g = static_cast<float>(self.grad[0] / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) {
            if (x[i] >= 0.0f) d[i] += g;
        }
    });
}

}  // namespace fregan::ops
