// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>

#include "gemm.hpp"
#include "kernels.hpp"
#include "resnet_forge/tensor.hpp"

namespace rforge {

namespace detail {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    if (a.dtype() != b.dtype()) throw ShapeError(std::string(op) + ": dtype mismatch");
}

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, std::int64_t stride, Padding padding) {
    if (input.rank() != 4) throw ShapeError("conv2d: input must be rank 4 [N,H,W,C], got " + input.shape().str());
    if (kernel.rank() != 4)
        throw ShapeError("conv2d: kernel must be rank 4 [kh,kw,Cin,Cout], got " + kernel.shape().str());
    if (input.dtype() != kernel.dtype()) throw ShapeError("conv2d: dtype mismatch");
    if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
    ConvGeometry g{};
    g.n = input.dim(0);
    g.h = input.dim(1);
    g.w = input.dim(2);
    g.cin = input.dim(3);
    g.kh = kernel.dim(0);
    g.kw = kernel.dim(1);
    g.cout = kernel.dim(3);
    g.stride = stride;
    if (kernel.dim(2) != g.cin)
        throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(2)) + " input channels, input has " +
                         std::to_string(g.cin));
    g.y = conv_axis(g.h, g.kh, stride, padding);
    g.x = conv_axis(g.w, g.kw, stride, padding);
    return g;
}

namespace {

// Samples per im2col chunk; keeps the column buffer around 4M elements.
std::int64_t chunk_samples(const ConvGeometry& g) {
    const std::int64_t per_sample = g.y.out * g.x.out * g.kh * g.kw * g.cin;
    return std::clamp<std::int64_t>((std::int64_t{1} << 22) / std::max<std::int64_t>(per_sample, 1), 1, g.n);
}

// Rows (n, oy, ox) x columns (ky, kx, ci) for samples [n0, n1). Taps that fall
// in the padding are zero.
template <typename T>
void im2col(const ConvGeometry& g, const T* in, std::int64_t n0, std::int64_t n1, T* col) {
    const std::int64_t k = g.kh * g.kw * g.cin;
    for (std::int64_t n = n0; n < n1; ++n) {
        for (std::int64_t oy = 0; oy < g.y.out; ++oy) {
            for (std::int64_t ox = 0; ox < g.x.out; ++ox) {
                T* row = col + (((n - n0) * g.y.out + oy) * g.x.out + ox) * k;
                for (std::int64_t ky = 0; ky < g.kh; ++ky) {
                    const std::int64_t iy = oy * g.stride - g.y.pad_before + ky;
                    for (std::int64_t kx = 0; kx < g.kw; ++kx) {
                        const std::int64_t ix = ox * g.stride - g.x.pad_before + kx;
                        T* dst = row + (ky * g.kw + kx) * g.cin;
                        if (iy < 0 || iy >= g.h || ix < 0 || ix >= g.w) {
                            std::fill(dst, dst + g.cin, T(0));
                        } else {
                            const T* src = in + ((n * g.h + iy) * g.w + ix) * g.cin;
                            std::copy(src, src + g.cin, dst);
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, std::int64_t n0, std::int64_t n1, T* in_grad) {
    const std::int64_t k = g.kh * g.kw * g.cin;
    for (std::int64_t n = n0; n < n1; ++n) {
        for (std::int64_t oy = 0; oy < g.y.out; ++oy) {
            for (std::int64_t ox = 0; ox < g.x.out; ++ox) {
                const T* row = col + (((n - n0) * g.y.out + oy) * g.x.out + ox) * k;
                for (std::int64_t ky = 0; ky < g.kh; ++ky) {
                    const std::int64_t iy = oy * g.stride - g.y.pad_before + ky;
                    if (iy < 0 || iy >= g.h) continue;
                    for (std::int64_t kx = 0; kx < g.kw; ++kx) {
                        const std::int64_t ix = ox * g.stride - g.x.pad_before + kx;
                        if (ix < 0 || ix >= g.w) continue;
                        const T* src = row + (ky * g.kw + kx) * g.cin;
                        T* dst = in_grad + ((n * g.h + iy) * g.w + ix) * g.cin;
                        for (std::int64_t c = 0; c < g.cin; ++c) dst[c] += src[c];
                    }
                }
            }
        }
    }
}

bool is_pointwise(const ConvGeometry& g) {
    return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.y.pad_before == 0 && g.x.pad_before == 0;
}

template <typename T>
Tensor conv2d_forward(const ConvGeometry& g, const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    Tensor out(Shape{g.n, g.y.out, g.x.out, g.cout}, dtype_of<T>());
    const T* in = input.data<T>().data();
    const T* w = kernel.data<T>().data();
    const T* b = bias.data<T>().data();
    T* o = out.data<T>().data();
    const std::int64_t k = g.kh * g.kw * g.cin;
    const std::int64_t rows_per_sample = g.y.out * g.x.out;

    if (is_pointwise(g)) {
        gemm<T>(g.n * rows_per_sample, g.cout, k, {in, k, 1}, {w, g.cout, 1}, o, g.cout, false);
    } else {
        const std::int64_t chunk = chunk_samples(g);
        std::vector<T> col(static_cast<std::size_t>(chunk * rows_per_sample * k));
        for (std::int64_t n0 = 0; n0 < g.n; n0 += chunk) {
            const std::int64_t n1 = std::min(g.n, n0 + chunk);
            im2col(g, in, n0, n1, col.data());
            gemm<T>((n1 - n0) * rows_per_sample, g.cout, k, {col.data(), k, 1}, {w, g.cout, 1},
                    o + n0 * rows_per_sample * g.cout, g.cout, false);
        }
    }
    const std::int64_t rows = g.n * rows_per_sample;
    for (std::int64_t r = 0; r < rows; ++r) {
        T* row = o + r * g.cout;
        for (std::int64_t c = 0; c < g.cout; ++c) row[c] = row[c] + b[c];
    }
    return out;
}

template <typename T>
ConvGrads conv2d_backward_impl(const ConvGeometry& g, const Tensor& input, const Tensor& kernel,
                               const Tensor& grad_out, bool want_input_grad) {
    const DType dt = dtype_of<T>();
    ConvGrads grads;
    grads.kernel = Tensor(kernel.shape(), dt);
    grads.bias = Tensor(Shape{g.cout}, dt);
    if (want_input_grad) grads.input = Tensor(input.shape(), dt);

    const T* in = input.data<T>().data();
    const T* w = kernel.data<T>().data();
    const T* go = grad_out.data<T>().data();
    T* gw = grads.kernel.data<T>().data();
    T* gb = grads.bias.data<T>().data();
    const std::int64_t k = g.kh * g.kw * g.cin;
    const std::int64_t rows_per_sample = g.y.out * g.x.out;

    const std::int64_t rows = g.n * rows_per_sample;
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < g.cout; ++c) gb[c] += go[r * g.cout + c];

    if (is_pointwise(g)) {
        gemm<T>(k, g.cout, rows, {in, 1, k}, {go, g.cout, 1}, gw, g.cout, false);
        if (want_input_grad)
            gemm<T>(rows, k, g.cout, {go, g.cout, 1}, {w, 1, g.cout}, grads.input.data<T>().data(), k, false);
        return grads;
    }

    const std::int64_t chunk = chunk_samples(g);
    std::vector<T> col(static_cast<std::size_t>(chunk * rows_per_sample * k));
    for (std::int64_t n0 = 0; n0 < g.n; n0 += chunk) {
        const std::int64_t n1 = std::min(g.n, n0 + chunk);
        const std::int64_t m = (n1 - n0) * rows_per_sample;
        const T* go_chunk = go + n0 * rows_per_sample * g.cout;
        im2col(g, in, n0, n1, col.data());
        gemm<T>(k, g.cout, m, {col.data(), 1, k}, {go_chunk, g.cout, 1}, gw, g.cout, n0 > 0);
        if (want_input_grad) {
            gemm<T>(m, k, g.cout, {go_chunk, g.cout, 1}, {w, 1, g.cout}, col.data(), k, false);
            col2im_add(g, col.data(), n0, n1, grads.input.data<T>().data());
        }
    }
    return grads;
}

template <typename T>
MaxPoolResult maxpool_impl(const Tensor& input, std::int64_t window, std::int64_t stride) {
    const std::int64_t n = input.dim(0), h = input.dim(1), w = input.dim(2), c = input.dim(3);
    const std::int64_t ho = (h - window) / stride + 1;
    const std::int64_t wo = (w - window) / stride + 1;
    MaxPoolResult res{Tensor(Shape{n, ho, wo, c}, dtype_of<T>()), {}};
    res.argmax.resize(static_cast<std::size_t>(n * ho * wo * c));
    const T* in = input.data<T>().data();
    T* out = res.output.data<T>().data();
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t oy = 0; oy < ho; ++oy)
            for (std::int64_t ox = 0; ox < wo; ++ox)
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    std::int64_t best = -1;
                    T best_v = -std::numeric_limits<T>::infinity();
                    // Row-major scan visits flat indices in increasing order, so
                    // strict > keeps the lowest index on ties.
                    for (std::int64_t ky = 0; ky < window; ++ky)
                        for (std::int64_t kx = 0; kx < window; ++kx) {
                            const std::int64_t idx = ((b * h + oy * stride + ky) * w + ox * stride + kx) * c + ch;
                            if (best < 0 || in[idx] > best_v) {
                                best = idx;
                                best_v = in[idx];
                            }
                        }
                    const std::int64_t o = ((b * ho + oy) * wo + ox) * c + ch;
                    out[o] = best_v;
                    res.argmax[static_cast<std::size_t>(o)] = best;
                }
    return res;
}

template <typename T, typename Fn>
Tensor map2(const Tensor& a, const Tensor& b, Fn fn) {
    Tensor out(a.shape(), a.dtype());
    auto x = a.data<T>();
    auto y = b.data<T>();
    auto o = out.data<T>();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(x[i], y[i]);
    return out;
}

template <typename T, typename Fn>
Tensor map1(const Tensor& a, Fn fn) {
    Tensor out(a.shape(), a.dtype());
    auto x = a.data<T>();
    auto o = out.data<T>();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(x[i]);
    return out;
}

}  // namespace

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out, std::int64_t stride,
                          Padding padding, bool want_input_grad) {
    const auto g = conv_geometry(input, kernel, stride, padding);
    if (grad_out.shape() != Shape{g.n, g.y.out, g.x.out, g.cout})
        throw ShapeError("conv2d backward: gradient shape " + grad_out.shape().str());
    return dispatch(input.dtype(), [&]<typename T>() {
        return conv2d_backward_impl<T>(g, input, kernel, grad_out, want_input_grad);
    });
}

Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::int64_t>& argmax, const Shape& input_shape) {
    Tensor gin(input_shape, grad_out.dtype());
    dispatch(grad_out.dtype(), [&]<typename T>() {
        auto go = grad_out.data<T>();
        auto gi = gin.data<T>();
        for (std::size_t i = 0; i < go.size(); ++i) gi[static_cast<std::size_t>(argmax[i])] += go[i];
    });
    return gin;
}

Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& input_shape) {
    Tensor gin(input_shape, grad_out.dtype());
    const std::int64_t n = input_shape[0], hw = input_shape[1] * input_shape[2], c = input_shape[3];
    dispatch(grad_out.dtype(), [&]<typename T>() {
        auto go = grad_out.data<T>();
        auto gi = gin.data<T>();
        const T inv = T(1) / static_cast<T>(hw);
        for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t p = 0; p < hw; ++p)
                for (std::int64_t ch = 0; ch < c; ++ch) gi[(b * hw + p) * c + ch] = go[b * c + ch] * inv;
    });
    return gin;
}

}  // namespace detail

namespace ops {

Tensor full(const Shape& shape, double value, DType dtype) {
    Tensor t = Tensor::full(shape, value, dtype);
    t.require_finite("full");
    return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul: operands must be rank 2, got " + a.shape().str() + " and " + b.shape().str());
    if (a.dim(1) != b.dim(0))
        throw ShapeError("matmul: inner dims differ " + a.shape().str() + " x " + b.shape().str());
    if (a.dtype() != b.dtype()) throw ShapeError("matmul: dtype mismatch");
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor out(Shape{m, n}, a.dtype());
    dispatch(a.dtype(), [&]<typename T>() {
        detail::gemm<T>(m, n, k, {a.data<T>().data(), k, 1}, {b.data<T>().data(), n, 1}, out.data<T>().data(), n,
                        false);
    });
    out.require_finite("matmul");
    return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::int64_t stride, Padding padding) {
    const auto g = detail::conv_geometry(input, kernel, stride, padding);
    if (bias.rank() != 1 || bias.dim(0) != g.cout || bias.dtype() != input.dtype())
        throw ShapeError("conv2d: bias must be [" + std::to_string(g.cout) + "], got " + bias.shape().str());
    Tensor out = dispatch(input.dtype(), [&]<typename T>() { return detail::conv2d_forward<T>(g, input, kernel, bias); });
    out.require_finite("conv2d");
    return out;
}

MaxPoolResult maxpool2d(const Tensor& input, std::int64_t window, std::int64_t stride) {
    if (input.rank() != 4) throw ShapeError("maxpool2d: input must be rank 4, got " + input.shape().str());
    if (window < 1 || stride < 1) throw ContractError("maxpool2d: window and stride must be >= 1");
    if (window > input.dim(1) || window > input.dim(2))
        throw ShapeError("maxpool2d: window " + std::to_string(window) + " exceeds input " + input.shape().str());
    auto res = dispatch(input.dtype(), [&]<typename T>() { return detail::maxpool_impl<T>(input, window, stride); });
    res.output.require_finite("maxpool2d");
    return res;
}

Tensor global_avg_pool(const Tensor& input) {
    if (input.rank() != 4) throw ShapeError("global_avg_pool: input must be rank 4, got " + input.shape().str());
    const std::int64_t n = input.dim(0), hw = input.dim(1) * input.dim(2), c = input.dim(3);
    Tensor out(Shape{n, c}, input.dtype());
    dispatch(input.dtype(), [&]<typename T>() {
        auto in = input.data<T>();
        auto o = out.data<T>();
        for (std::int64_t b = 0; b < n; ++b) {
            for (std::int64_t p = 0; p < hw; ++p)
                for (std::int64_t ch = 0; ch < c; ++ch) o[b * c + ch] += in[(b * hw + p) * c + ch];
            for (std::int64_t ch = 0; ch < c; ++ch) o[b * c + ch] /= static_cast<T>(hw);
        }
    });
    out.require_finite("global_avg_pool");
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same(a, b, "add");
    Tensor out = dispatch(a.dtype(), [&]<typename T>() { return detail::map2<T>(a, b, [](T x, T y) { return x + y; }); });
    out.require_finite("add");
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same(a, b, "sub");
    Tensor out = dispatch(a.dtype(), [&]<typename T>() { return detail::map2<T>(a, b, [](T x, T y) { return x - y; }); });
    out.require_finite("sub");
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same(a, b, "mul");
    Tensor out = dispatch(a.dtype(), [&]<typename T>() { return detail::map2<T>(a, b, [](T x, T y) { return x * y; }); });
    out.require_finite("mul");
    return out;
}

Tensor max_with_scalar(const Tensor& a, double s) {
    Tensor out = dispatch(a.dtype(), [&]<typename T>() {
        const T v = static_cast<T>(s);
        return detail::map1<T>(a, [v](T x) { return x > v ? x : v; });
    });
    out.require_finite("max_with_scalar");
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = dispatch(a.dtype(), [&]<typename T>() {
        const T v = static_cast<T>(s);
        return detail::map1<T>(a, [v](T x) { return x * v; });
    });
    out.require_finite("scale");
    return out;
}

double sum(const Tensor& a) {
    return dispatch(a.dtype(), [&]<typename T>() {
        double acc = 0.0;
        for (T v : a.data<T>()) acc += static_cast<double>(v);
        return acc;
    });
}

}  // namespace ops

}  // namespace rforge
