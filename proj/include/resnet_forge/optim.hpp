// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "resnet_forge/autograd.hpp"
#include "resnet_forge/layers.hpp"

namespace rforge {

struct AdamHyper {
    double lr0 = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;

    void validate() const;
};

struct AdamState {
    std::map<std::string, Tensor> m;
    std::map<std::string, Tensor> v;
    std::int64_t t = 0;
};

// One bias-corrected Adam update at learning rate `lr`:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
// Parameters without an entry in `grads` are left untouched. Any non-finite
// gradient aborts the step before anything is modified.
void adam_step(ParameterStore& params, const GradientMap& grads, AdamState& state, const AdamHyper& hyper, double lr);

struct PlateauConfig {
    double factor = 0.2;
    std::int64_t patience = 3;
    double min_delta = 1e-4;
    double min_lr = 1e-6;
};

// Multiplies the learning rate by `factor` after `patience` consecutive
// epochs whose monitored loss fails to beat the best by more than min_delta.
class PlateauScheduler {
public:
    PlateauScheduler(double lr0, PlateauConfig cfg = {});

    // Returns the learning rate to use from now on.
    double update(double val_loss);

    double lr() const noexcept { return lr_; }
    double best_loss() const noexcept { return best_; }
    std::int64_t wait() const noexcept { return wait_; }
    const PlateauConfig& config() const noexcept { return cfg_; }

private:
    PlateauConfig cfg_;
    double lr_;
    double best_;
    std::int64_t wait_ = 0;
};

struct EarlyStopConfig {
    std::int64_t patience = 7;
    double min_delta = 1e-4;
};

enum class StopDecision { keep_going, stop };

// Tracks the best validation loss with a full weight snapshot. After
// `patience` consecutive non-improving epochs it restores the snapshot
// into the model and reports stop.
class EarlyStopping {
public:
    explicit EarlyStopping(EarlyStopConfig cfg = {});

    StopDecision update(double val_loss, ParameterStore& current);

    bool stopped() const noexcept { return stopped_; }
    double best_loss() const noexcept { return best_; }
    std::int64_t best_epoch() const noexcept { return best_epoch_; }
    std::int64_t wait() const noexcept { return wait_; }
    const std::vector<Parameter>& best_weights() const noexcept { return snapshot_; }
    void restore_best(ParameterStore& params) const;

private:
    EarlyStopConfig cfg_;
    double best_;
    std::int64_t epoch_ = 0;
    std::int64_t best_epoch_ = 0;
    std::int64_t wait_ = 0;
    bool stopped_ = false;
    std::vector<Parameter> snapshot_;
};

}  // namespace rforge
