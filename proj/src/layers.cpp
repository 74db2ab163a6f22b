// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/layers.hpp"

#include <cmath>

namespace rforge {

Parameter& ParameterStore::add(std::string name, Tensor value, bool trainable) {
    if (index_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
    index_.emplace(name, params_.size());
    params_.push_back(Parameter{std::move(name), std::move(value), trainable});
    return params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
}

const Parameter* ParameterStore::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter& ParameterStore::get(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw ContractError("unknown parameter '" + name + "'");
}

const Parameter& ParameterStore::get(const std::string& name) const {
    if (const auto* p = find(name)) return *p;
    throw ContractError("unknown parameter '" + name + "'");
}

std::int64_t ParameterStore::trainable_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_)
        if (p.trainable) n += p.value.numel();
    return n;
}

std::int64_t ParameterStore::non_trainable_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_)
        if (!p.trainable) n += p.value.numel();
    return n;
}

Var ForwardContext::param(const std::string& name) {
    if (auto it = bound.find(name); it != bound.end()) return it->second;
    Parameter& p = params.get(name);
    if (!p.trainable) throw ContractError("parameter '" + name + "' is not trainable");
    Var v = tape.parameter(name, p.value);
    bound.emplace(name, v);
    return v;
}

std::string_view shortcut_name(Shortcut s) {
    switch (s) {
        case Shortcut::identity:
            return "identity";
        case Shortcut::projection:
            return "projection";
        case Shortcut::none:
            return "none";
    }
    return "?";
}

void ResidualBlockSpec::validate() const {
    if (in_channels < 1 || out_channels < 1 || stride < 1)
        throw SpecError("residual block needs positive channels and stride");
    if (shortcut == Shortcut::identity && (in_channels != out_channels || stride != 1))
        throw SpecError("identity shortcut requires in_channels == out_channels and stride 1 (got " +
                        std::to_string(in_channels) + "->" + std::to_string(out_channels) + ", stride " +
                        std::to_string(stride) + ")");
}

namespace layers {

Var conv(ForwardContext& ctx, Var x, const std::string& prefix, std::int64_t stride, Padding padding) {
    return ag::conv2d(ctx.tape, x, ctx.param(prefix + ".kernel"), ctx.param(prefix + ".bias"), stride, padding);
}

Var batchnorm(ForwardContext& ctx, Var x, const std::string& prefix) {
    Var gamma = ctx.param(prefix + ".gamma");
    Var beta = ctx.param(prefix + ".beta");
    Parameter& rmean = ctx.params.get(prefix + ".running_mean");
    Parameter& rvar = ctx.params.get(prefix + ".running_var");
    if (ctx.mode == LayerMode::eval)
        return ag::batch_norm_eval(ctx.tape, x, gamma, beta, rmean.value, rvar.value, ctx.bn.epsilon);

    auto res = ag::batch_norm_train(ctx.tape, x, gamma, beta, ctx.bn.epsilon);
    if (ctx.update_running_stats) {
        const double mom = ctx.bn.momentum;
        for (std::size_t c = 0; c < res.batch_mean.size(); ++c) {
            const auto i = static_cast<std::int64_t>(c);
            rmean.value.set(i, mom * rmean.value.at(i) + (1.0 - mom) * res.batch_mean[c]);
            rvar.value.set(i, mom * rvar.value.at(i) + (1.0 - mom) * res.batch_var[c]);
        }
    }
    return res.out;
}

Var relu(ForwardContext& ctx, Var x) {
    return ag::relu(ctx.tape, x);
}

Var dense(ForwardContext& ctx, Var x, const std::string& prefix) {
    Var y = ag::matmul(ctx.tape, x, ctx.param(prefix + ".kernel"));
    return ag::bias_add(ctx.tape, y, ctx.param(prefix + ".bias"));
}

Var dropout(ForwardContext& ctx, Var x, double p) {
    if (!(p >= 0.0 && p < 1.0)) throw ContractError("dropout probability must be in [0, 1), got " + std::to_string(p));
    if (ctx.mode == LayerMode::eval || !ctx.dropout_enabled || p == 0.0) return x;
    if (ctx.dropout_rng == nullptr) throw ContractError("train-mode dropout needs an rng stream");
    const Tensor& xv = ctx.tape.value(x);
    Tensor mask(xv.shape(), xv.dtype());
    const double keep_scale = 1.0 / (1.0 - p);
    dispatch(xv.dtype(), [&]<typename T>() {
        for (auto& m : mask.data<T>()) m = ctx.dropout_rng->bernoulli(p) ? T(0) : static_cast<T>(keep_scale);
    });
    return ag::apply_mask(ctx.tape, x, std::move(mask));
}

Var residual_block(ForwardContext& ctx, Var x, const ResidualBlockSpec& spec, const std::string& prefix) {
    spec.validate();
    const Tensor& xv = ctx.tape.value(x);
    if (xv.rank() != 4 || xv.dim(3) != spec.in_channels)
        throw ShapeError(prefix + ": expected " + std::to_string(spec.in_channels) + " input channels, got " +
                         xv.shape().str());

    Var f = conv(ctx, x, prefix + ".conv1", spec.stride);
    f = batchnorm(ctx, f, prefix + ".bn1");
    f = relu(ctx, f);
    f = conv(ctx, f, prefix + ".conv2", 1);
    f = batchnorm(ctx, f, prefix + ".bn2");

    switch (spec.shortcut) {
        case Shortcut::none:
            return relu(ctx, f);
        case Shortcut::identity:
            return relu(ctx, ag::add(ctx.tape, f, x));
        case Shortcut::projection: {
            Var s = conv(ctx, x, prefix + ".shortcut.conv", spec.stride);
            s = batchnorm(ctx, s, prefix + ".shortcut.bn");
            return relu(ctx, ag::add(ctx.tape, f, s));
        }
    }
    throw SpecError("unknown shortcut kind");
}

namespace {

Tensor he_normal(const Shape& shape, std::int64_t fan_in, DType dtype, std::uint64_t seed, const std::string& name) {
    // One stream per parameter name, so a parameter's initial value does not
    // depend on which other layers exist (skip vs no-skip share branches).
    RngStream rng(seed, streams::init, {fnv1a64(name)});
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Tensor t(shape, dtype);
    dispatch(dtype, [&]<typename T>() {
        for (auto& v : t.data<T>()) v = static_cast<T>(std_dev * rng.normal());
    });
    return t;
}

}  // namespace

void add_conv_params(ParameterStore& store, const std::string& prefix, std::int64_t kernel, std::int64_t in,
                     std::int64_t out, DType dtype, std::uint64_t seed) {
    const std::string kname = prefix + ".kernel";
    store.add(kname, he_normal(Shape{kernel, kernel, in, out}, kernel * kernel * in, dtype, seed, kname));
    store.add(prefix + ".bias", Tensor(Shape{out}, dtype));
}

void add_batchnorm_params(ParameterStore& store, const std::string& prefix, std::int64_t channels, DType dtype) {
    store.add(prefix + ".gamma", Tensor::full(Shape{channels}, 1.0, dtype));
    store.add(prefix + ".beta", Tensor(Shape{channels}, dtype));
    store.add(prefix + ".running_mean", Tensor(Shape{channels}, dtype), false);
    store.add(prefix + ".running_var", Tensor::full(Shape{channels}, 1.0, dtype), false);
}

void add_dense_params(ParameterStore& store, const std::string& prefix, std::int64_t in, std::int64_t out, DType dtype,
                      std::uint64_t seed) {
    const std::string kname = prefix + ".kernel";
    store.add(kname, he_normal(Shape{in, out}, in, dtype, seed, kname));
    store.add(prefix + ".bias", Tensor(Shape{out}, dtype));
}

void add_residual_block_params(ParameterStore& store, const std::string& prefix, const ResidualBlockSpec& spec,
                               DType dtype, std::uint64_t seed) {
    spec.validate();
    add_conv_params(store, prefix + ".conv1", 3, spec.in_channels, spec.out_channels, dtype, seed);
    add_batchnorm_params(store, prefix + ".bn1", spec.out_channels, dtype);
    add_conv_params(store, prefix + ".conv2", 3, spec.out_channels, spec.out_channels, dtype, seed);
    add_batchnorm_params(store, prefix + ".bn2", spec.out_channels, dtype);
    if (spec.shortcut == Shortcut::projection) {
        add_conv_params(store, prefix + ".shortcut.conv", 1, spec.in_channels, spec.out_channels, dtype, seed);
        add_batchnorm_params(store, prefix + ".shortcut.bn", spec.out_channels, dtype);
    }
}

}  // namespace layers

}  // namespace rforge
