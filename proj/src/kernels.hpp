// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

// Backward kernels shared by the autograd rules. Not part of the public API.

#pragma once

#include <cstdint>
#include <vector>

#include "resnet_forge/tensor.hpp"

namespace rforge::detail {

struct ConvGeometry {
    std::int64_t n, h, w, cin;
    std::int64_t kh, kw, cout;
    std::int64_t stride;
    AxisGeometry y, x;
};

ConvGeometry conv_geometry(const Tensor& input, const Tensor& kernel, std::int64_t stride, Padding padding);

struct ConvGrads {
    Tensor input;  // empty when not requested
    Tensor kernel;
    Tensor bias;
};

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out, std::int64_t stride,
                          Padding padding, bool want_input_grad);

Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::int64_t>& argmax, const Shape& input_shape);

Tensor global_avg_pool_backward(const Tensor& grad_out, const Shape& input_shape);

void require_same(const Tensor& a, const Tensor& b, const char* op);

}  // namespace rforge::detail
