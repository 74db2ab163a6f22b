// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>

#include "gemm.hpp"
#include "kernels.hpp"
#include "resnet_forge/rng.hpp"

namespace rforge {

namespace testing {
namespace {
std::mutex fault_mutex;
std::map<std::string, double>& faults() {
    static std::map<std::string, double> f;
    return f;
}
}  // namespace

void set_backward_fault(const std::string& op, double factor) {
    std::lock_guard lock(fault_mutex);
    faults()[op] = factor;
}

void clear_backward_faults() {
    std::lock_guard lock(fault_mutex);
    faults().clear();
}

namespace {
std::optional<double> fault_for(const std::string& op) {
    std::lock_guard lock(fault_mutex);
    auto it = faults().find(op);
    if (it == faults().end()) return std::nullopt;
    return it->second;
}
}  // namespace
}  // namespace testing

namespace {

void accumulate_into(std::optional<Tensor>& slot, Tensor g) {
    if (!slot) {
        slot = std::move(g);
        return;
    }
    detail::require_same(*slot, g, "gradient accumulation");
    dispatch(g.dtype(), [&]<typename T>() {
        auto dst = slot->data<T>();
        auto src = g.data<T>();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    });
}

}  // namespace

Var Tape::input(Tensor value, bool requires_grad) {
    Node n;
    n.op = "input";
    n.owned = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::parameter(const std::string& name, const Tensor& value) {
    if (param_ids_.contains(name)) throw ContractError("parameter '" + name + "' registered twice on one tape");
    Node n;
    n.op = "parameter";
    n.borrowed = &value;
    n.requires_grad = true;
    n.param_name = name;
    nodes_.push_back(std::move(n));
    const auto id = static_cast<std::int32_t>(nodes_.size() - 1);
    param_ids_[name] = id;
    return Var{id};
}

Var Tape::record(std::string op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
    Node n;
    n.op = std::move(op);
    for (auto v : inputs) {
        if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
            throw ContractError("op '" + n.op + "' references a var that is not on this tape");
        n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(v.id)].requires_grad;
    }
    n.inputs = std::move(inputs);
    n.owned = std::move(value);
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) throw ContractError("var is not on this tape");
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tensor& Tape::value(Var v) const {
    return node(v).value();
}

bool Tape::requires_grad(Var v) const {
    return node(v).requires_grad;
}

const std::string& Tape::op(Var v) const {
    return node(v).op;
}

const Tensor* Tape::grad(Var v) const {
    node(v);
    const auto i = static_cast<std::size_t>(v.id);
    if (i >= grads_.size() || !grads_[i]) return nullptr;
    return &*grads_[i];
}

GradientMap Tape::backward(Var loss) {
    const Node& ln = node(loss);
    if (ln.value().numel() != 1)
        throw ContractError("backward: loss must be a scalar, got shape " + ln.value().shape().str());

    grads_.assign(nodes_.size(), std::nullopt);
    grads_[static_cast<std::size_t>(loss.id)] = Tensor::full(ln.value().shape(), 1.0, ln.value().dtype());

    for (std::int32_t id = loss.id; id >= 0; --id) {
        auto& slot = grads_[static_cast<std::size_t>(id)];
        if (!slot) continue;
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.inputs.empty() || !n.requires_grad) continue;
        if (!n.backward) throw UnsupportedOpError("no backward rule registered for op '" + n.op + "'");

        auto input_grads = n.backward(*slot);
        if (input_grads.size() != n.inputs.size())
            throw ContractError("backward rule of '" + n.op + "' returned the wrong number of gradients");
        const auto fault = testing::fault_for(n.op);
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            const Var in = n.inputs[k];
            auto& g = input_grads[k];
            if (g.empty() || !nodes_[static_cast<std::size_t>(in.id)].requires_grad) continue;
            if (g.shape() != nodes_[static_cast<std::size_t>(in.id)].value().shape())
                throw ShapeError("backward rule of '" + n.op + "' produced gradient " + g.shape().str() +
                                 " for input " + nodes_[static_cast<std::size_t>(in.id)].value().shape().str());
            if (fault) g = ops::scale(g, *fault);
            accumulate_into(grads_[static_cast<std::size_t>(in.id)], std::move(g));
        }
        // Interior gradients are released as soon as they are consumed.
        if (n.param_name.empty() && id != loss.id) slot.reset();
    }

    GradientMap out;
    for (const auto& [name, id] : param_ids_) {
        auto& g = grads_[static_cast<std::size_t>(id)];
        if (g) out.emplace(name, *g);
    }
    return out;
}

namespace detail {

// While finite_diff_check probes, every ReLU gate and max-pool winner is
// folded into this hash so the checker can tell when a perturbation moved
// the function across a non-differentiable point.
thread_local std::uint64_t* kink_hash = nullptr;

void fold_kink(std::uint64_t bit) {
    *kink_hash = splitmix64(*kink_hash ^ bit);
}

}  // namespace detail

namespace ag {

namespace {

template <typename Fn>
Tensor map_pair(const Tensor& a, const Tensor& b, Fn fn) {
    Tensor out(a.shape(), a.dtype());
    dispatch(a.dtype(), [&]<typename T>() {
        auto x = a.data<T>();
        auto y = b.data<T>();
        auto o = out.data<T>();
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = fn(x[i], y[i]);
    });
    return out;
}

}  // namespace

Var add(Tape& t, Var a, Var b) {
    Tensor v = ops::add(t.value(a), t.value(b));
    return t.record("add", {a, b}, std::move(v), [](const Tensor& g) { return std::vector<Tensor>{g, g}; });
}

Var sub(Tape& t, Var a, Var b) {
    Tensor v = ops::sub(t.value(a), t.value(b));
    return t.record("sub", {a, b}, std::move(v),
                    [](const Tensor& g) { return std::vector<Tensor>{g, ops::scale(g, -1.0)}; });
}

Var mul(Tape& t, Var a, Var b) {
    Tensor v = ops::mul(t.value(a), t.value(b));
    Tape* tp = &t;
    return t.record("mul", {a, b}, std::move(v), [tp, a, b](const Tensor& g) {
        return std::vector<Tensor>{ops::mul(g, tp->value(b)), ops::mul(g, tp->value(a))};
    });
}

Var scale(Tape& t, Var a, double s) {
    Tensor v = ops::scale(t.value(a), s);
    return t.record("scale", {a}, std::move(v), [s](const Tensor& g) { return std::vector<Tensor>{ops::scale(g, s)}; });
}

Var relu(Tape& t, Var a) {
    Tensor v = ops::max_with_scalar(t.value(a), 0.0);
    if (detail::kink_hash) {
        for (double x : t.value(a).to_vector()) detail::fold_kink(x > 0 ? 1 : 2);
    }
    Tape* tp = &t;
    return t.record("relu", {a}, std::move(v), [tp, a](const Tensor& g) {
        // Subgradient at exactly 0 is 0.
        return std::vector<Tensor>{map_pair(g, tp->value(a), [](auto gv, auto x) { return x > 0 ? gv : decltype(gv)(0); })};
    });
}

Var sum(Tape& t, Var a) {
    const Tensor& x = t.value(a);
    Tensor v = dispatch(x.dtype(), [&]<typename T>() {
        T acc = 0;
        for (T e : x.data<T>()) acc += e;
        return Tensor::full(Shape{1}, static_cast<double>(acc), x.dtype());
    });
    v.require_finite("sum");
    const Shape in_shape = x.shape();
    return t.record("sum", {a}, std::move(v), [in_shape](const Tensor& g) {
        return std::vector<Tensor>{Tensor::full(in_shape, g.at(0), g.dtype())};
    });
}

Var reshape(Tape& t, Var a, const Shape& shape) {
    Tensor v = t.value(a).reshape(shape);
    const Shape in_shape = t.value(a).shape();
    return t.record("reshape", {a}, std::move(v),
                    [in_shape](const Tensor& g) { return std::vector<Tensor>{g.reshape(in_shape)}; });
}

Var matmul(Tape& t, Var a, Var b) {
    Tensor v = ops::matmul(t.value(a), t.value(b));
    Tape* tp = &t;
    return t.record("matmul", {a, b}, std::move(v), [tp, a, b](const Tensor& g) {
        const Tensor& av = tp->value(a);
        const Tensor& bv = tp->value(b);
        const std::int64_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
        Tensor ga(av.shape(), av.dtype());
        Tensor gb(bv.shape(), bv.dtype());
        dispatch(av.dtype(), [&]<typename T>() {
            const T* gp = g.data<T>().data();
            // dA = G * B^T ; dB = A^T * G
            detail::gemm<T>(m, k, n, {gp, n, 1}, {bv.data<T>().data(), 1, n}, ga.data<T>().data(), k, false);
            detail::gemm<T>(k, n, m, {av.data<T>().data(), 1, k}, {gp, n, 1}, gb.data<T>().data(), n, false);
        });
        return std::vector<Tensor>{std::move(ga), std::move(gb)};
    });
}

Var bias_add(Tape& t, Var x, Var bias) {
    const Tensor& xv = t.value(x);
    const Tensor& bv = t.value(bias);
    if (xv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != xv.dim(1) || xv.dtype() != bv.dtype())
        throw ShapeError("bias_add: x " + xv.shape().str() + " incompatible with bias " + bv.shape().str());
    Tensor v(xv.shape(), xv.dtype());
    const std::int64_t rows = xv.dim(0), cols = xv.dim(1);
    dispatch(xv.dtype(), [&]<typename T>() {
        auto xs = xv.data<T>();
        auto bs = bv.data<T>();
        auto o = v.data<T>();
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t c = 0; c < cols; ++c) o[r * cols + c] = xs[r * cols + c] + bs[c];
    });
    v.require_finite("bias_add");
    return t.record("bias_add", {x, bias}, std::move(v), [rows, cols](const Tensor& g) {
        Tensor gb(Shape{cols}, g.dtype());
        dispatch(g.dtype(), [&]<typename T>() {
            auto gs = g.data<T>();
            auto o = gb.data<T>();
            for (std::int64_t r = 0; r < rows; ++r)
                for (std::int64_t c = 0; c < cols; ++c) o[c] += gs[r * cols + c];
        });
        return std::vector<Tensor>{g, std::move(gb)};
    });
}

Var conv2d(Tape& t, Var x, Var kernel, Var bias, std::int64_t stride, Padding padding) {
    Tensor v = ops::conv2d(t.value(x), t.value(kernel), t.value(bias), stride, padding);
    Tape* tp = &t;
    return t.record("conv2d", {x, kernel, bias}, std::move(v), [tp, x, kernel, stride, padding](const Tensor& g) {
        auto grads = detail::conv2d_backward(tp->value(x), tp->value(kernel), g, stride, padding, tp->requires_grad(x));
        return std::vector<Tensor>{std::move(grads.input), std::move(grads.kernel), std::move(grads.bias)};
    });
}

Var maxpool2d(Tape& t, Var x, std::int64_t window, std::int64_t stride) {
    auto res = ops::maxpool2d(t.value(x), window, stride);
    if (detail::kink_hash) {
        for (auto i : res.argmax) detail::fold_kink(static_cast<std::uint64_t>(i));
    }
    auto argmax = std::make_shared<std::vector<std::int64_t>>(std::move(res.argmax));
    const Shape in_shape = t.value(x).shape();
    return t.record("maxpool2d", {x}, std::move(res.output), [argmax, in_shape](const Tensor& g) {
        return std::vector<Tensor>{detail::maxpool2d_backward(g, *argmax, in_shape)};
    });
}

Var global_avg_pool(Tape& t, Var x) {
    Tensor v = ops::global_avg_pool(t.value(x));
    const Shape in_shape = t.value(x).shape();
    return t.record("global_avg_pool", {x}, std::move(v), [in_shape](const Tensor& g) {
        return std::vector<Tensor>{detail::global_avg_pool_backward(g, in_shape)};
    });
}

Var apply_mask(Tape& t, Var x, Tensor mask) {
    Tensor v = ops::mul(t.value(x), mask);
    return t.record("dropout", {x}, std::move(v), [mask = std::move(mask)](const Tensor& g) {
        return std::vector<Tensor>{ops::mul(g, mask)};
    });
}

namespace {

struct BnSaved {
    Tensor xhat;
    std::vector<double> inv_std;
};

void check_bn_operands(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    if (x.rank() != 4 && x.rank() != 2) throw ShapeError("batch_norm: input must be rank 2 or 4, got " + x.shape().str());
    const std::int64_t c = x.dim(x.rank() - 1);
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
        throw ShapeError("batch_norm: gamma/beta must be [" + std::to_string(c) + "]");
    if (gamma.dtype() != x.dtype() || beta.dtype() != x.dtype()) throw ShapeError("batch_norm: dtype mismatch");
}

}  // namespace

BatchNormResult batch_norm_train(Tape& t, Var x, Var gamma, Var beta, double epsilon) {
    const Tensor& xv = t.value(x);
    check_bn_operands(xv, t.value(gamma), t.value(beta));
    const std::int64_t c = xv.dim(xv.rank() - 1);
    const std::int64_t m = xv.numel() / c;
    if (m < 2)
        throw DegenerateBatchError("batch_norm: train mode needs at least 2 values per channel, got " +
                                   std::to_string(m));

    BatchNormResult res;
    res.batch_mean.assign(static_cast<std::size_t>(c), 0.0);
    res.batch_var.assign(static_cast<std::size_t>(c), 0.0);
    auto saved = std::make_shared<BnSaved>();
    saved->xhat = Tensor(xv.shape(), xv.dtype());
    saved->inv_std.resize(static_cast<std::size_t>(c));
    Tensor y(xv.shape(), xv.dtype());

    dispatch(xv.dtype(), [&]<typename T>() {
        auto xs = xv.data<T>();
        auto gs = t.value(gamma).data<T>();
        auto bs = t.value(beta).data<T>();
        auto xh = saved->xhat.data<T>();
        auto ys = y.data<T>();
        auto& mean = res.batch_mean;
        auto& var = res.batch_var;
        for (std::int64_t r = 0; r < m; ++r)
            for (std::int64_t ch = 0; ch < c; ++ch) mean[ch] += static_cast<double>(xs[r * c + ch]);
        for (auto& v : mean) v /= static_cast<double>(m);
        for (std::int64_t r = 0; r < m; ++r)
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const double d = static_cast<double>(xs[r * c + ch]) - mean[ch];
                var[ch] += d * d;
            }
        for (auto& v : var) v /= static_cast<double>(m);
        for (std::int64_t ch = 0; ch < c; ++ch) saved->inv_std[ch] = 1.0 / std::sqrt(var[ch] + epsilon);
        for (std::int64_t r = 0; r < m; ++r)
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T h = static_cast<T>((static_cast<double>(xs[r * c + ch]) - mean[ch]) * saved->inv_std[ch]);
                xh[r * c + ch] = h;
                ys[r * c + ch] = gs[ch] * h + bs[ch];
            }
    });
    y.require_finite("batch_norm");

    Tape* tp = &t;
    res.out = t.record("batch_norm", {x, gamma, beta}, std::move(y), [tp, gamma, saved, m, c](const Tensor& g) {
        Tensor gx(g.shape(), g.dtype());
        Tensor gg(Shape{c}, g.dtype());
        Tensor gb(Shape{c}, g.dtype());
        dispatch(g.dtype(), [&]<typename T>() {
            auto go = g.data<T>();
            auto xh = saved->xhat.data<T>();
            auto gam = tp->value(gamma).data<T>();
            std::vector<double> sum_g(static_cast<std::size_t>(c), 0.0), sum_gx(static_cast<std::size_t>(c), 0.0);
            for (std::int64_t r = 0; r < m; ++r)
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    sum_g[ch] += static_cast<double>(go[r * c + ch]);
                    sum_gx[ch] += static_cast<double>(go[r * c + ch]) * static_cast<double>(xh[r * c + ch]);
                }
            auto gxs = gx.data<T>();
            const double inv_m = 1.0 / static_cast<double>(m);
            for (std::int64_t r = 0; r < m; ++r)
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const double k = static_cast<double>(gam[ch]) * saved->inv_std[ch];
                    const double v = static_cast<double>(go[r * c + ch]) - inv_m * sum_g[ch] -
                                     static_cast<double>(xh[r * c + ch]) * inv_m * sum_gx[ch];
                    gxs[r * c + ch] = static_cast<T>(k * v);
                }
            auto ggs = gg.data<T>();
            auto gbs = gb.data<T>();
            for (std::int64_t ch = 0; ch < c; ++ch) {
                ggs[ch] = static_cast<T>(sum_gx[ch]);
                gbs[ch] = static_cast<T>(sum_g[ch]);
            }
        });
        return std::vector<Tensor>{std::move(gx), std::move(gg), std::move(gb)};
    });
    return res;
}

Var batch_norm_eval(Tape& t, Var x, Var gamma, Var beta, const Tensor& running_mean, const Tensor& running_var,
                    double epsilon) {
    const Tensor& xv = t.value(x);
    check_bn_operands(xv, t.value(gamma), t.value(beta));
    const std::int64_t c = xv.dim(xv.rank() - 1);
    const std::int64_t m = xv.numel() / c;
    if (running_mean.shape() != Shape{c} || running_var.shape() != Shape{c})
        throw ShapeError("batch_norm: running statistics must be [" + std::to_string(c) + "]");

    auto saved = std::make_shared<BnSaved>();
    saved->xhat = Tensor(xv.shape(), xv.dtype());
    saved->inv_std.resize(static_cast<std::size_t>(c));
    for (std::int64_t ch = 0; ch < c; ++ch) saved->inv_std[ch] = 1.0 / std::sqrt(running_var.at(ch) + epsilon);
    Tensor y(xv.shape(), xv.dtype());
    dispatch(xv.dtype(), [&]<typename T>() {
        auto xs = xv.data<T>();
        auto gs = t.value(gamma).data<T>();
        auto bs = t.value(beta).data<T>();
        auto xh = saved->xhat.data<T>();
        auto ys = y.data<T>();
        std::vector<double> mean(static_cast<std::size_t>(c));
        for (std::int64_t ch = 0; ch < c; ++ch) mean[ch] = running_mean.at(ch);
        for (std::int64_t r = 0; r < m; ++r)
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T h = static_cast<T>((static_cast<double>(xs[r * c + ch]) - mean[ch]) * saved->inv_std[ch]);
                xh[r * c + ch] = h;
                ys[r * c + ch] = gs[ch] * h + bs[ch];
            }
    });
    y.require_finite("batch_norm");

    Tape* tp = &t;
    return t.record("batch_norm_eval", {x, gamma, beta}, std::move(y), [tp, gamma, saved, m, c](const Tensor& g) {
        Tensor gx(g.shape(), g.dtype());
        Tensor gg(Shape{c}, g.dtype());
        Tensor gb(Shape{c}, g.dtype());
        dispatch(g.dtype(), [&]<typename T>() {
            auto go = g.data<T>();
            auto xh = saved->xhat.data<T>();
            auto gam = tp->value(gamma).data<T>();
            auto gxs = gx.data<T>();
            auto ggs = gg.data<T>();
            auto gbs = gb.data<T>();
            for (std::int64_t r = 0; r < m; ++r)
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    gxs[r * c + ch] = static_cast<T>(static_cast<double>(go[r * c + ch]) * gam[ch] * saved->inv_std[ch]);
                    ggs[ch] += go[r * c + ch] * xh[r * c + ch];
                    gbs[ch] += go[r * c + ch];
                }
        });
        return std::vector<Tensor>{std::move(gx), std::move(gg), std::move(gb)};
    });
}

}  // namespace ag

FiniteDiffReport finite_diff_check(const LossBuilder& forward, std::vector<Parameter>& params,
                                   const FiniteDiffOptions& options) {
    if (!(options.epsilon > 0.0)) throw ContractError("finite_diff_check: epsilon must be > 0");
    if (options.coords_per_param < 1) throw ContractError("finite_diff_check: coords_per_param must be >= 1");
    for (const auto& p : params)
        if (p.value.dtype() != DType::f64)
            throw ContractError("finite_diff_check: parameter '" + p.name + "' is not double precision");

    std::uint64_t fingerprint = 0;
    auto evaluate = [&](bool with_grad) -> std::pair<double, GradientMap> {
        Tape tape;
        std::map<std::string, Var> vars;
        for (auto& p : params) vars[p.name] = p.trainable ? tape.parameter(p.name, p.value) : tape.input(p.value);
        fingerprint = 0;
        detail::kink_hash = &fingerprint;
        Var loss;
        try {
            loss = forward(tape, vars);
        } catch (...) {
            detail::kink_hash = nullptr;
            throw;
        }
        detail::kink_hash = nullptr;
        const Tensor& lv = tape.value(loss);
        if (lv.numel() != 1) throw ContractError("finite_diff_check: loss must be scalar");
        const double l = lv.at(0);
        if (!std::isfinite(l)) throw NumericError("finite_diff_check: non-finite loss while probing");
        GradientMap g;
        if (with_grad) g = tape.backward(loss);
        return {l, std::move(g)};
    };

    auto [base_loss, analytic] = evaluate(true);
    const std::uint64_t base_fingerprint = fingerprint;

    FiniteDiffReport report;
    report.epsilon = options.epsilon;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        if (!p.trainable) continue;
        const std::int64_t n = p.value.numel();
        // Coordinates are visited in a seeded random order until enough
        // smooth ones have been checked.
        std::vector<std::int64_t> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        RngStream rng(options.seed, streams::probe, {pi});
        auto it = analytic.find(p.name);
        FiniteDiffReport::Entry entry{p.name, 0.0, 0, 0, 0};
        auto data = p.value.data<double>();
        for (std::int64_t k = 0; k < n && entry.coords_checked < options.coords_per_param; ++k) {
            const auto j = k + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - k)));
            std::swap(order[k], order[j]);
            const auto i = order[k];
            const double orig = data[i];
            const double h = options.scale_epsilon ? options.epsilon * std::max(1.0, std::abs(orig)) : options.epsilon;
            data[i] = orig + h;
            const double fp = evaluate(false).first;
            const bool smooth_p = fingerprint == base_fingerprint;
            data[i] = orig - h;
            const double fm = evaluate(false).first;
            const bool smooth_m = fingerprint == base_fingerprint;
            data[i] = orig;
            if (!(smooth_p && smooth_m)) {
                ++entry.kinks_skipped;
                continue;
            }
            ++entry.coords_checked;
            const double fd = (fp - fm) / (2.0 * h);
            const double ad = it == analytic.end() ? 0.0 : it->second.data<double>()[i];
            const double resolution = options.noise_ulps * std::numeric_limits<double>::epsilon() *
                                      std::max(1.0, std::abs(base_loss)) / (2.0 * h);
            if (std::max(std::abs(fd), std::abs(ad)) < resolution) {
                ++entry.zero_coords;
                continue;
            }
            const double rel = std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-8});
            entry.max_rel_error = std::max(entry.max_rel_error, rel);
        }
        if (entry.max_rel_error >= report.max_rel_error) {
            report.max_rel_error = entry.max_rel_error;
            report.worst_param = p.name;
        }
        report.per_param.push_back(std::move(entry));
    }
    return report;
}

}  // namespace rforge
