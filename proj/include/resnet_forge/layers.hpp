// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "resnet_forge/autograd.hpp"
#include "resnet_forge/rng.hpp"
#include "resnet_forge/tensor.hpp"

namespace rforge {

enum class LayerMode { train, eval };

struct BatchNormConfig {
    double epsilon = 1e-3;
    double momentum = 0.99;
};

// Named parameters of one model, in registration (forward) order.
class ParameterStore {
public:
    Parameter& add(std::string name, Tensor value, bool trainable = true);

    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.contains(name); }

    std::vector<Parameter>& all() noexcept { return params_; }
    const std::vector<Parameter>& all() const noexcept { return params_; }
    std::size_t size() const noexcept { return params_.size(); }

    std::int64_t trainable_count() const;
    std::int64_t non_trainable_count() const;

private:
    std::vector<Parameter> params_;
    std::map<std::string, std::size_t> index_;
};

// Everything a layer needs during one forward pass.
struct ForwardContext {
    ForwardContext(Tape& tape, ParameterStore& params, LayerMode mode) : tape(tape), params(params), mode(mode) {}

    Tape& tape;
    ParameterStore& params;
    LayerMode mode;
    // Required when mode == train and a dropout layer has p > 0.
    RngStream* dropout_rng = nullptr;
    bool dropout_enabled = true;
    bool update_running_stats = true;
    BatchNormConfig bn;
    // Pre-bound parameter vars (e.g. from finite_diff_check). Anything not
    // here is registered on the tape on first use.
    std::map<std::string, Var> bound;

    // Tape var of a trainable parameter.
    Var param(const std::string& name);
};

enum class Shortcut { identity, projection, none };

struct ResidualBlockSpec {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t stride = 1;
    Shortcut shortcut = Shortcut::identity;

    // Throws SpecError when the shortcut cannot carry x to the output shape.
    void validate() const;
};

std::string_view shortcut_name(Shortcut s);

// Trainable layers. `prefix` names the layer's parameters, e.g. a conv with
// prefix "stem.conv" owns "stem.conv.kernel" and "stem.conv.bias".
namespace layers {

Var conv(ForwardContext& ctx, Var x, const std::string& prefix, std::int64_t stride, Padding padding = Padding::same);
Var batchnorm(ForwardContext& ctx, Var x, const std::string& prefix);
Var relu(ForwardContext& ctx, Var x);
Var dense(ForwardContext& ctx, Var x, const std::string& prefix);
Var dropout(ForwardContext& ctx, Var x, double p);
Var residual_block(ForwardContext& ctx, Var x, const ResidualBlockSpec& spec, const std::string& prefix);

// Parameter registration with He-normal (fan-in) kernels, zero biases,
// gamma = 1, beta = 0, running mean 0 and running variance 1.
void add_conv_params(ParameterStore& store, const std::string& prefix, std::int64_t kernel, std::int64_t in,
                     std::int64_t out, DType dtype, std::uint64_t seed);
void add_batchnorm_params(ParameterStore& store, const std::string& prefix, std::int64_t channels, DType dtype);
void add_dense_params(ParameterStore& store, const std::string& prefix, std::int64_t in, std::int64_t out, DType dtype,
                      std::uint64_t seed);
void add_residual_block_params(ParameterStore& store, const std::string& prefix, const ResidualBlockSpec& spec,
                               DType dtype, std::uint64_t seed);

}  // namespace layers

}  // namespace rforge
