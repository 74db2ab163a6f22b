// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>

#include "resnet_forge/layers.hpp"
#include "resnet_forge/loss.hpp"
#include "resnet_forge/models.hpp"

namespace rforge {

namespace {

constexpr DType f64 = DType::f64;

Tensor random_tensor(const Shape& shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape, f64);
    for (auto& v : t.data<double>()) v = rng.uniform(lo, hi);
    return t;
}

// Keeps |v| >= margin so a central difference never straddles a ReLU kink.
Tensor away_from_zero(Tensor t, double margin) {
    for (auto& v : t.data<double>())
        if (std::abs(v) < margin) v = v < 0 ? -margin - std::abs(v) : margin + v;
    return t;
}

// sum(out * weights): a loss whose gradient w.r.t. out is a fixed random tensor.
Var weighted_sum(Tape& t, Var out, const Tensor& weights) {
    return ag::sum(t, ag::mul(t, out, t.input(weights)));
}

struct Case {
    std::vector<Parameter> params;
    ParameterStore store;  // non-trainable state (BN running statistics)
    std::function<Var(Tape&, ForwardContext&)> body;
};

GradCheckResult run_case(const std::string& name, Case& c, const GradCheckOptions& opt) {
    FiniteDiffOptions fd;
    fd.epsilon = opt.epsilon;
    fd.coords_per_param = opt.coords_per_param;
    fd.seed = opt.seed;
    const auto report = finite_diff_check(
        [&](Tape& tape, const std::map<std::string, Var>& vars) {
            ForwardContext ctx(tape, c.store, LayerMode::train);
            ctx.bound = vars;
            ctx.dropout_enabled = false;
            ctx.update_running_stats = false;
            return c.body(tape, ctx);
        },
        c.params, fd);
    GradCheckResult r;
    r.layer_type = name;
    r.max_rel_error = report.max_rel_error;
    r.worst_param = report.worst_param;
    for (const auto& e : report.per_param) {
        r.coords += e.coords_checked;
        r.zero_coords += e.zero_coords;
        r.kinks_skipped += e.kinks_skipped;
    }
    r.passed = report.max_rel_error < opt.tolerance;
    return r;
}

// Moves every parameter of a store into the checker's list (trainable ones
// are probed; the store keeps the running statistics).
void take_trainable(Case& c) {
    for (const auto& p : c.store.all())
        if (p.trainable) c.params.push_back(p);
}

Case make_case(const std::string& name, std::uint64_t seed) {
    RngStream rng(seed, streams::probe, {fnv1a64(name)});
    Case c;
    auto input = [&](const Shape& s) { return random_tensor(s, rng); };

    if (name == "conv") {
        layers::add_conv_params(c.store, "c", 3, 3, 4, f64, seed);
        take_trainable(c);
        auto x = input({2, 6, 6, 3});
        auto w = input({2, 3, 3, 4});
        c.params.push_back({"x", x, true});
        c.body = [w](Tape& t, ForwardContext& ctx) {
            return weighted_sum(t, layers::conv(ctx, ctx.param("x"), "c", 2), w);
        };
    } else if (name == "batchnorm") {
        layers::add_batchnorm_params(c.store, "bn", 3, f64);
        for (auto& p : c.store.all())
            if (p.trainable) p.value = random_tensor(p.value.shape(), rng, 0.5, 1.5);
        take_trainable(c);
        c.params.push_back({"x", input({4, 3, 3, 3}), true});
        auto w = input({4, 3, 3, 3});
        c.body = [w](Tape& t, ForwardContext& ctx) {
            return weighted_sum(t, layers::batchnorm(ctx, ctx.param("x"), "bn"), w);
        };
    } else if (name == "relu") {
        c.params.push_back({"x", away_from_zero(input({3, 7}), 0.1), true});
        auto w = input({3, 7});
        c.body = [w](Tape& t, ForwardContext& ctx) { return weighted_sum(t, layers::relu(ctx, ctx.param("x")), w); };
    } else if (name == "dense") {
        layers::add_dense_params(c.store, "d", 5, 4, f64, seed);
        take_trainable(c);
        c.params.push_back({"x", input({3, 5}), true});
        auto w = input({3, 4});
        c.body = [w](Tape& t, ForwardContext& ctx) { return weighted_sum(t, layers::dense(ctx, ctx.param("x"), "d"), w); };
    } else if (name == "dropout") {
        // The mask is fixed, so the layer is linear in x.
        c.params.push_back({"x", input({4, 6}), true});
        Tensor mask({4, 6}, f64);
        for (auto& m : mask.data<double>()) m = rng.bernoulli(0.5) ? 0.0 : 2.0;
        auto w = input({4, 6});
        c.body = [w, mask](Tape& t, ForwardContext& ctx) {
            return weighted_sum(t, ag::apply_mask(t, ctx.param("x"), mask), w);
        };
    } else if (name == "maxpool") {
        c.params.push_back({"x", input({2, 4, 4, 2}), true});
        auto w = input({2, 2, 2, 2});
        c.body = [w](Tape& t, ForwardContext& ctx) { return weighted_sum(t, ag::maxpool2d(t, ctx.param("x"), 2, 2), w); };
    } else if (name == "global_avg_pool") {
        c.params.push_back({"x", input({2, 3, 3, 4}), true});
        auto w = input({2, 4});
        c.body = [w](Tape& t, ForwardContext& ctx) { return weighted_sum(t, ag::global_avg_pool(t, ctx.param("x")), w); };
    } else if (name.starts_with("residual_")) {
        ResidualBlockSpec spec{4, 4, 1, Shortcut::identity};
        if (name == "residual_projection") spec = {3, 4, 2, Shortcut::projection};
        if (name == "residual_none") spec = {4, 4, 1, Shortcut::none};
        layers::add_residual_block_params(c.store, "b", spec, f64, seed);
        for (auto& p : c.store.all())
            if (p.name.ends_with(".beta")) p.value = random_tensor(p.value.shape(), rng, -0.2, 0.2);
        take_trainable(c);
        const std::int64_t out_hw = spec.stride == 2 ? 2 : 4;
        c.params.push_back({"x", input({4, 4, 4, spec.in_channels}), true});
        auto w = input({4, out_hw, out_hw, spec.out_channels});
        c.body = [w, spec](Tape& t, ForwardContext& ctx) {
            return weighted_sum(t, layers::residual_block(ctx, ctx.param("x"), spec, "b"), w);
        };
    } else if (name == "softmax_cross_entropy") {
        c.params.push_back({"x", input({3, 10}), true});
        Tensor onehot({3, 10}, f64);
        for (int i = 0; i < 3; ++i) onehot.set(i * 10 + static_cast<int>(rng.below(10)), 1.0);
        c.body = [onehot](Tape& t, ForwardContext& ctx) { return ag::softmax_cross_entropy(t, ctx.param("x"), onehot); };
    } else if (name == "conv_bn_relu_dense") {
        layers::add_conv_params(c.store, "conv", 3, 3, 6, f64, seed);
        layers::add_batchnorm_params(c.store, "bn", 6, f64);
        layers::add_dense_params(c.store, "head", 6, 10, f64, seed);
        for (auto& p : c.store.all())
            if (p.name == "bn.beta") p.value = random_tensor(p.value.shape(), rng, -0.3, 0.3);
        take_trainable(c);
        auto x = input({4, 8, 8, 3});
        Tensor onehot({4, 10}, f64);
        for (int i = 0; i < 4; ++i) onehot.set(i * 10 + i, 1.0);
        c.body = [x, onehot](Tape& t, ForwardContext& ctx) {
            Var h = layers::conv(ctx, t.input(x), "conv", 1);
            h = layers::relu(ctx, layers::batchnorm(ctx, h, "bn"));
            h = ag::global_avg_pool(t, h);
            return ag::softmax_cross_entropy(t, layers::dense(ctx, h, "head"), onehot);
        };
    } else if (name == "mini_resnet") {
        auto spec = build_mini_resnet(10);
        spec.input = {16, 16, 3};
        auto model = std::make_shared<Model>(spec, f64, seed);
        c.store = model->parameters();
        take_trainable(c);
        auto x = input({4, 16, 16, 3});
        Tensor onehot({4, 10}, f64);
        for (int i = 0; i < 4; ++i) onehot.set(i * 10 + 3 * i, 1.0);
        c.body = [model, x, onehot](Tape& t, ForwardContext& ctx) {
            return ag::softmax_cross_entropy(t, model->forward(ctx, t.input(x)), onehot);
        };
    } else {
        throw ContractError("unknown gradient check '" + name + "'");
    }
    return c;
}

}  // namespace

std::vector<std::string> gradient_check_names(bool include_full_model) {
    std::vector<std::string> names = {"conv",          "batchnorm",         "relu",
                                      "dense",         "dropout",           "maxpool",
                                      "global_avg_pool", "residual_identity", "residual_projection",
                                      "residual_none", "softmax_cross_entropy", "conv_bn_relu_dense"};
    if (include_full_model) names.push_back("mini_resnet");
    return names;
}

GradCheckResult run_gradient_check(const std::string& layer_type, const GradCheckOptions& options) {
    Case c = make_case(layer_type, options.seed);
    return run_case(layer_type, c, options);
}

std::vector<GradCheckResult> run_gradient_checks(const GradCheckOptions& options) {
    std::vector<GradCheckResult> out;
    for (const auto& name : gradient_check_names(options.include_full_model))
        out.push_back(run_gradient_check(name, options));
    return out;
}

OracleCheckResult run_conv_oracle_check(std::int64_t trials, std::uint64_t seed) {
    if (trials < 1) throw ContractError("conv oracle: trials must be >= 1");
    RngStream rng(seed, streams::synthetic, {0xC0u});
    auto pick = [&](std::int64_t lo, std::int64_t hi) { return lo + static_cast<std::int64_t>(rng.below(hi - lo + 1)); };
    OracleCheckResult res{"conv2d", trials, 0.0, true};
    for (std::int64_t trial = 0; trial < trials; ++trial) {
        const std::int64_t n = pick(1, 2), h = pick(1, 8), w = pick(1, 8), cin = pick(1, 4), cout = pick(1, 4);
        const std::int64_t kh = pick(1, 3), kw = pick(1, 3), stride = pick(1, 2);
        const Padding padding = (rng.below(2) == 0 || kh > h || kw > w) ? Padding::same : Padding::valid;
        const Tensor x = random_tensor({n, h, w, cin}, rng, -1.0, 1.0);
        const Tensor k = random_tensor({kh, kw, cin, cout}, rng, -1.0, 1.0);
        const Tensor b = random_tensor({cout}, rng, -1.0, 1.0);
        const Tensor fast = ops::conv2d(x, k, b, stride, padding);

        const auto gy = conv_axis(h, kh, stride, padding), gx = conv_axis(w, kw, stride, padding);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t oy = 0; oy < gy.out; ++oy)
                for (std::int64_t ox = 0; ox < gx.out; ++ox)
                    for (std::int64_t co = 0; co < cout; ++co) {
                        // Same tap order as the im2col row: ky, kx, ci; bias last.
                        double acc = 0.0;
                        for (std::int64_t ky = 0; ky < kh; ++ky)
                            for (std::int64_t kx = 0; kx < kw; ++kx)
                                for (std::int64_t ci = 0; ci < cin; ++ci) {
                                    const std::int64_t iy = oy * stride + ky - gy.pad_before;
                                    const std::int64_t ix = ox * stride + kx - gx.pad_before;
                                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                    acc = std::fma(x.at(((i * h + iy) * w + ix) * cin + ci),
                                                   k.at(((ky * kw + kx) * cin + ci) * cout + co), acc);
                                }
                        acc += b.at(co);
                        const double got = fast.at(((i * gy.out + oy) * gx.out + ox) * cout + co);
                        res.max_abs_diff = std::max(res.max_abs_diff, std::abs(got - acc));
                        if (got != acc) res.passed = false;
                    }
    }
    return res;
}

}  // namespace rforge
