// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace rforge {

std::string_view dtype_name(DType dtype) {
    return dtype == DType::f32 ? "f32" : "f64";
}

Shape::Shape(std::initializer_list<std::int64_t> dims) : dims_(dims) {
    validate();
}

Shape::Shape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) {
    validate();
}

void Shape::validate() const {
    if (dims_.empty()) throw ShapeError("shape must have rank >= 1");
    for (auto d : dims_)
        if (d < 1) throw ShapeError("shape " + str() + " has a non-positive dim");
}

std::int64_t Shape::numel() const noexcept {
    if (dims_.empty()) return 0;
    std::int64_t n = 1;
    for (auto d : dims_) n *= d;
    return n;
}

std::string Shape::str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, DType dtype) : shape_(std::move(shape)), dtype_(dtype) {
    const auto n = static_cast<std::size_t>(shape_.numel());
    if (dtype == DType::f32)
        storage_ = std::vector<float>(n, 0.0f);
    else
        storage_ = std::vector<double>(n, 0.0);
}

Tensor Tensor::full(const Shape& shape, double value, DType dtype) {
    Tensor t(shape, dtype);
    dispatch(dtype, [&]<typename T>() {
        auto d = t.data<T>();
        std::fill(d.begin(), d.end(), static_cast<T>(value));
    });
    return t;
}

Tensor Tensor::from(const Shape& shape, std::span<const double> values, DType dtype) {
    if (static_cast<std::int64_t>(values.size()) != shape.numel())
        throw ShapeError("Tensor::from: " + std::to_string(values.size()) + " values for shape " + shape.str());
    Tensor t(shape, dtype);
    dispatch(dtype, [&]<typename T>() {
        auto d = t.data<T>();
        std::transform(values.begin(), values.end(), d.begin(), [](double v) { return static_cast<T>(v); });
    });
    return t;
}

Tensor Tensor::from(const Shape& shape, std::initializer_list<double> values, DType dtype) {
    return from(shape, std::span<const double>(values.begin(), values.size()), dtype);
}

double Tensor::at(std::int64_t i) const {
    if (i < 0 || i >= numel()) throw ShapeError("index " + std::to_string(i) + " out of range");
    return dispatch(dtype_, [&]<typename T>() { return static_cast<double>(data<T>()[i]); });
}

void Tensor::set(std::int64_t i, double value) {
    if (i < 0 || i >= numel()) throw ShapeError("index " + std::to_string(i) + " out of range");
    dispatch(dtype_, [&]<typename T>() { data<T>()[i] = static_cast<T>(value); });
}

std::vector<double> Tensor::to_vector() const {
    return dispatch(dtype_, [&]<typename T>() {
        auto d = data<T>();
        return std::vector<double>(d.begin(), d.end());
    });
}

Tensor Tensor::to(DType dtype) const {
    if (dtype == dtype_) return *this;
    Tensor out(shape_, dtype);
    dispatch(dtype_, [&]<typename S>() {
        dispatch(dtype, [&]<typename D>() {
            auto src = data<S>();
            auto dst = out.data<D>();
            std::transform(src.begin(), src.end(), dst.begin(), [](S v) { return static_cast<D>(v); });
        });
    });
    return out;
}

Tensor Tensor::reshape(const Shape& shape) const {
    if (shape.numel() != numel())
        throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
    Tensor out = *this;
    out.shape_ = shape;
    return out;
}

bool Tensor::all_finite() const {
    if (empty()) return true;
    return dispatch(dtype_, [&]<typename T>() {
        for (T v : data<T>())
            if (!std::isfinite(v)) return false;
        return true;
    });
}

void Tensor::require_finite(std::string_view context) const {
    if (!all_finite()) throw NumericError(std::string(context) + ": non-finite value in result");
}

bool Tensor::bit_equal(const Tensor& other) const {
    if (shape_ != other.shape_ || dtype_ != other.dtype_) return false;
    if (empty()) return true;
    return dispatch(dtype_, [&]<typename T>() {
        auto a = data<T>();
        auto b = other.data<T>();
        return std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
    });
}

AxisGeometry conv_axis(std::int64_t in, std::int64_t kernel, std::int64_t stride, Padding padding) {
    if (stride < 1) throw ContractError("stride must be >= 1");
    AxisGeometry g;
    if (padding == Padding::same) {
        g.out = (in + stride - 1) / stride;
        const std::int64_t total = std::max<std::int64_t>((g.out - 1) * stride + kernel - in, 0);
        g.pad_before = total / 2;
    } else {
        if (kernel > in) throw ShapeError("kernel extent exceeds input extent under valid padding");
        g.out = (in - kernel) / stride + 1;
        g.pad_before = 0;
    }
    return g;
}

}  // namespace rforge
