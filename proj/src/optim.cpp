// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rforge {

void AdamHyper::validate() const {
    if (!(lr0 > 0.0)) throw ContractError("Adam: lr0 must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
        throw ContractError("Adam: betas must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ContractError("Adam: epsilon must be > 0");
}

void adam_step(ParameterStore& params, const GradientMap& grads, AdamState& state, const AdamHyper& hyper, double lr) {
    hyper.validate();
    if (!(lr > 0.0)) throw ContractError("Adam: learning rate must be > 0");
    for (const auto& [name, g] : grads) {
        const Parameter& p = params.get(name);
        if (g.shape() != p.value.shape()) throw ShapeError("Adam: gradient shape mismatch for '" + name + "'");
        if (!g.all_finite()) throw NumericError("Adam: non-finite gradient for '" + name + "'");
    }

    state.t += 1;
    const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));

    for (const auto& [name, g] : grads) {
        Parameter& p = params.get(name);
        auto [mit, m_new] = state.m.try_emplace(name, p.value.shape(), p.value.dtype());
        auto [vit, v_new] = state.v.try_emplace(name, p.value.shape(), p.value.dtype());
        dispatch(p.value.dtype(), [&]<typename T>() {
            auto theta = p.value.data<T>();
            auto gs = g.data<T>();
            auto ms = mit->second.data<T>();
            auto vs = vit->second.data<T>();
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double gi = gs[i];
                const double m = hyper.beta1 * ms[i] + (1.0 - hyper.beta1) * gi;
                const double v = hyper.beta2 * vs[i] + (1.0 - hyper.beta2) * gi * gi;
                ms[i] = static_cast<T>(m);
                vs[i] = static_cast<T>(v);
                const double m_hat = m / bc1;
                const double v_hat = v / bc2;
                theta[i] = static_cast<T>(theta[i] - lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon));
            }
        });
    }
}

PlateauScheduler::PlateauScheduler(double lr0, PlateauConfig cfg)
    : cfg_(cfg), lr_(lr0), best_(std::numeric_limits<double>::infinity()) {
    if (!(lr0 > 0.0)) throw ContractError("PlateauScheduler: lr0 must be > 0");
    if (!(cfg.factor > 0.0 && cfg.factor < 1.0)) throw ContractError("PlateauScheduler: factor must be in (0, 1)");
    if (cfg.patience < 1) throw ContractError("PlateauScheduler: patience must be >= 1");
}

double PlateauScheduler::update(double val_loss) {
    if (val_loss < best_ - cfg_.min_delta) {
        best_ = val_loss;
        wait_ = 0;
        return lr_;
    }
    if (++wait_ >= cfg_.patience) {
        lr_ = std::max(lr_ * cfg_.factor, cfg_.min_lr);
        wait_ = 0;
    }
    return lr_;
}

EarlyStopping::EarlyStopping(EarlyStopConfig cfg) : cfg_(cfg), best_(std::numeric_limits<double>::infinity()) {
    if (cfg.patience < 1) throw ContractError("EarlyStopping: patience must be >= 1");
}

StopDecision EarlyStopping::update(double val_loss, ParameterStore& current) {
    ++epoch_;
    if (stopped_) return StopDecision::stop;
    if (val_loss < best_ - cfg_.min_delta) {
        best_ = val_loss;
        best_epoch_ = epoch_;
        wait_ = 0;
        snapshot_ = current.all();
        return StopDecision::keep_going;
    }
    if (++wait_ >= cfg_.patience) {
        stopped_ = true;
        restore_best(current);
        return StopDecision::stop;
    }
    return StopDecision::keep_going;
}

void EarlyStopping::restore_best(ParameterStore& params) const {
    for (const auto& saved : snapshot_) params.get(saved.name).value = saved.value;
}

}  // namespace rforge
