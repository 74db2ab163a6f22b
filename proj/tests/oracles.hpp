// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference implementations used by the tests. Deliberately
// naive: plain nested loops over std::vector<double>, no library kernels.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

struct Conv {
    std::int64_t n, h, w, cin, kh, kw, cout, stride;
    bool same;
};

inline std::int64_t out_extent(std::int64_t in, std::int64_t k, std::int64_t s, bool same) {
    return same ? (in + s - 1) / s : (in - k) / s + 1;
}

inline std::int64_t pad_before(std::int64_t in, std::int64_t k, std::int64_t s, bool same) {
    if (!same) return 0;
    const std::int64_t out = out_extent(in, k, s, true);
    const std::int64_t total = std::max<std::int64_t>((out - 1) * s + k - in, 0);
    return total / 2;
}

// NHWC cross-correlation, kernel [kh,kw,cin,cout]. Accumulates with fma in
// (ky, kx, ci) order starting from 0, then adds the bias.
inline std::vector<double> conv2d(const Conv& c, const std::vector<double>& x, const std::vector<double>& k,
                                  const std::vector<double>& b) {
    const auto oh = out_extent(c.h, c.kh, c.stride, c.same), ow = out_extent(c.w, c.kw, c.stride, c.same);
    const auto py = pad_before(c.h, c.kh, c.stride, c.same), px = pad_before(c.w, c.kw, c.stride, c.same);
    std::vector<double> y(static_cast<std::size_t>(c.n * oh * ow * c.cout));
    for (std::int64_t n = 0; n < c.n; ++n)
        for (std::int64_t oy = 0; oy < oh; ++oy)
            for (std::int64_t ox = 0; ox < ow; ++ox)
                for (std::int64_t co = 0; co < c.cout; ++co) {
                    double acc = 0.0;
                    for (std::int64_t ky = 0; ky < c.kh; ++ky)
                        for (std::int64_t kx = 0; kx < c.kw; ++kx) {
                            const auto iy = oy * c.stride + ky - py, ix = ox * c.stride + kx - px;
                            if (iy < 0 || iy >= c.h || ix < 0 || ix >= c.w) continue;
                            for (std::int64_t ci = 0; ci < c.cin; ++ci)
                                acc = std::fma(x[((n * c.h + iy) * c.w + ix) * c.cin + ci],
                                               k[((ky * c.kw + kx) * c.cin + ci) * c.cout + co], acc);
                        }
                    y[((n * oh + oy) * ow + ox) * c.cout + co] = acc + b[co];
                }
    return y;
}

// Row-major [m,k] x [k,n], fma in increasing k.
inline std::vector<double> matmul(std::int64_t m, std::int64_t n, std::int64_t kk, const std::vector<double>& a,
                                  const std::vector<double>& b) {
    std::vector<double> c(static_cast<std::size_t>(m * n));
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::int64_t p = 0; p < kk; ++p) acc = std::fma(a[i * kk + p], b[p * n + j], acc);
            c[i * n + j] = acc;
        }
    return c;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

// Parameter count of a 3x3 conv (with bias) followed by batch norm.
inline std::int64_t conv_bn(std::int64_t k, std::int64_t in, std::int64_t out) {
    return k * k * in * out + out + 2 * out;
}

}  // namespace oracle
