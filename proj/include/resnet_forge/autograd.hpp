// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "resnet_forge/tensor.hpp"

namespace rforge {

struct Parameter {
    std::string name;
    Tensor value;
    bool trainable = true;
};

// Gradients keyed by parameter name. Only trainable parameters that the
// forward pass touched appear; absence means zero.
using GradientMap = std::map<std::string, Tensor>;

// Handle to a node on a Tape.
struct Var {
    std::int32_t id = -1;
    bool valid() const noexcept { return id >= 0; }
};

// Returns one gradient per op input, in input order. An empty Tensor means
// "no gradient for this input".
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out)>;

// Records executed primitives in execution order, which is also a
// topological order: a node can only reference nodes created before it.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    Var input(Tensor value, bool requires_grad = false);
    // Trainable leaf. The tensor is borrowed and must outlive the tape.
    Var parameter(const std::string& name, const Tensor& value);

    Var record(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

    const Tensor& value(Var v) const;
    bool requires_grad(Var v) const;
    const std::string& op(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    // Reverse sweep from a scalar loss. Afterwards grad() is available for
    // every node that requires a gradient and was reached.
    GradientMap backward(Var loss);
    const Tensor* grad(Var v) const;

private:
    struct Node {
        std::string op;
        std::vector<Var> inputs;
        Tensor owned;
        const Tensor* borrowed = nullptr;
        BackwardFn backward;
        bool requires_grad = false;
        std::string param_name;  // non-empty for parameters
        const Tensor& value() const { return borrowed ? *borrowed : owned; }
    };

    const Node& node(Var v) const;

    std::vector<Node> nodes_;
    std::vector<std::optional<Tensor>> grads_;
    std::map<std::string, std::int32_t> param_ids_;
};

// Differentiable primitives. Each validates shapes through the tensor-core op
// it wraps and records a backward rule.
namespace ag {

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
Var relu(Tape& t, Var a);
Var sum(Tape& t, Var a);
Var reshape(Tape& t, Var a, const Shape& shape);
Var matmul(Tape& t, Var a, Var b);
// x [N,F] + bias [F] broadcast over rows.
Var bias_add(Tape& t, Var x, Var bias);
Var conv2d(Tape& t, Var x, Var kernel, Var bias, std::int64_t stride, Padding padding);
Var maxpool2d(Tape& t, Var x, std::int64_t window, std::int64_t stride);
Var global_avg_pool(Tape& t, Var x);
// Multiplies by a fixed mask (already scaled for inverted dropout).
Var apply_mask(Tape& t, Var x, Tensor mask);

struct BatchNormResult {
    Var out;
    std::vector<double> batch_mean;  // empty in eval mode
    std::vector<double> batch_var;   // biased
};

// Normalizes over (N,H,W) per channel using batch statistics.
BatchNormResult batch_norm_train(Tape& t, Var x, Var gamma, Var beta, double epsilon);
// Normalizes with fixed statistics.
Var batch_norm_eval(Tape& t, Var x, Var gamma, Var beta, const Tensor& running_mean, const Tensor& running_var,
                    double epsilon);

}  // namespace ag

struct FiniteDiffOptions {
    double epsilon = 1e-5;
    // Perturb by epsilon * max(1, |theta_i|) instead of plain epsilon.
    bool scale_epsilon = true;
    // Coordinates probed per parameter; all of them when the tensor is smaller.
    std::int64_t coords_per_param = 64;
    std::uint64_t seed = 0;
    // A central difference cannot resolve slopes below
    // noise_ulps * eps * max(1, |loss|) / (2h). Coordinates where both
    // estimates fall under that are counted as agreeing zeros; this is where
    // gradients that vanish in exact arithmetic (a conv bias feeding
    // train-mode batch norm) end up.
    double noise_ulps = 256.0;
};

struct FiniteDiffReport {
    struct Entry {
        std::string name;
        double max_rel_error = 0.0;
        std::int64_t coords_checked = 0;
        std::int64_t zero_coords = 0;
        // Probes whose +/- evaluations changed a ReLU gate or max-pool winner;
        // a replacement coordinate is drawn for each.
        std::int64_t kinks_skipped = 0;
    };
    std::vector<Entry> per_param;
    double max_rel_error = 0.0;
    std::string worst_param;
    double epsilon = 0.0;
};

// Builds the scalar loss on a fresh tape from the parameter vars.
using LossBuilder = std::function<Var(Tape&, const std::map<std::string, Var>&)>;

// Central-difference check of Tape::backward. Parameters must be f64; each
// trainable one is probed on a seeded coordinate subset. Relative error is
// |fd - ad| / max(|fd|, |ad|, 1e-8).
FiniteDiffReport finite_diff_check(const LossBuilder& forward, std::vector<Parameter>& params,
                                   const FiniteDiffOptions& options = {});

namespace testing {

// Scales every gradient produced by backward rules of `op`. Used to prove the
// self-test catches a broken rule.
void set_backward_fault(const std::string& op, double factor);
void clear_backward_faults();

}  // namespace testing

}  // namespace rforge
