// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "resnet_forge/errors.hpp"

namespace rforge {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

std::string_view dtype_name(DType dtype);

template <typename T>
constexpr DType dtype_of() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

// Calls fn.template operator()<T>() with T matching the runtime dtype.
template <typename Fn>
decltype(auto) dispatch(DType dtype, Fn&& fn) {
    if (dtype == DType::f32) return std::forward<Fn>(fn).template operator()<float>();
    return std::forward<Fn>(fn).template operator()<double>();
}

// Ordered list of extents. Every dim must be >= 1; rank 0 is not allowed.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::int64_t> dims);
    explicit Shape(std::vector<std::int64_t> dims);

    std::size_t rank() const noexcept { return dims_.size(); }
    std::int64_t operator[](std::size_t i) const { return dims_.at(i); }
    const std::vector<std::int64_t>& dims() const noexcept { return dims_; }
    std::int64_t numel() const noexcept;
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;

private:
    void validate() const;
    std::vector<std::int64_t> dims_;
};

// Dense row-major array. Image tensors are laid out N,H,W,C.
class Tensor {
public:
    Tensor() = default;
    // Zero-filled.
    Tensor(Shape shape, DType dtype);

    static Tensor full(const Shape& shape, double value, DType dtype = DType::f32);
    static Tensor zeros(const Shape& shape, DType dtype = DType::f32) { return full(shape, 0.0, dtype); }
    static Tensor from(const Shape& shape, std::span<const double> values, DType dtype = DType::f32);
    static Tensor from(const Shape& shape, std::initializer_list<double> values, DType dtype = DType::f32);

    const Shape& shape() const noexcept { return shape_; }
    DType dtype() const noexcept { return dtype_; }
    std::int64_t numel() const noexcept { return shape_.numel(); }
    std::size_t rank() const noexcept { return shape_.rank(); }
    std::int64_t dim(std::size_t i) const { return shape_[i]; }
    bool empty() const noexcept { return shape_.rank() == 0; }

    template <typename T>
    std::span<T> data() {
        check_dtype<T>();
        auto& v = std::get<std::vector<T>>(storage_);
        return {v.data(), v.size()};
    }
    template <typename T>
    std::span<const T> data() const {
        check_dtype<T>();
        const auto& v = std::get<std::vector<T>>(storage_);
        return {v.data(), v.size()};
    }

    double at(std::int64_t flat_index) const;
    void set(std::int64_t flat_index, double value);
    std::vector<double> to_vector() const;

    Tensor to(DType dtype) const;
    Tensor reshape(const Shape& shape) const;

    // Throws NumericError naming `context` if any element is NaN or Inf.
    void require_finite(std::string_view context) const;
    bool all_finite() const;

    // Bitwise equality of shape, dtype and every element.
    bool bit_equal(const Tensor& other) const;

private:
    template <typename T>
    void check_dtype() const {
        if (dtype_ != dtype_of<T>())
            throw ContractError("tensor dtype is " + std::string(dtype_name(dtype_)) + ", accessed as " +
                                std::string(dtype_name(dtype_of<T>())));
    }

    Shape shape_;
    DType dtype_ = DType::f32;
    std::variant<std::vector<float>, std::vector<double>> storage_;
};

enum class Padding { same, valid };

// Output extent and leading pad of one spatial axis of a convolution.
struct AxisGeometry {
    std::int64_t out = 0;
    std::int64_t pad_before = 0;
};

AxisGeometry conv_axis(std::int64_t in, std::int64_t kernel, std::int64_t stride, Padding padding);

struct MaxPoolResult {
    Tensor output;
    // Flat input index of the winner for each output element.
    std::vector<std::int64_t> argmax;
};

// Raw forward kernels. Every result is checked finite.
namespace ops {

Tensor full(const Shape& shape, double value, DType dtype = DType::f32);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::int64_t stride,
              Padding padding);
MaxPoolResult maxpool2d(const Tensor& input, std::int64_t window, std::int64_t stride);
Tensor global_avg_pool(const Tensor& input);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor max_with_scalar(const Tensor& a, double s);
Tensor scale(const Tensor& a, double s);
double sum(const Tensor& a);

}  // namespace ops

}  // namespace rforge
