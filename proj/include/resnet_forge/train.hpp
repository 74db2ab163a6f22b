// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "resnet_forge/checkpoint.hpp"
#include "resnet_forge/data.hpp"
#include "resnet_forge/history.hpp"
#include "resnet_forge/metrics.hpp"
#include "resnet_forge/models.hpp"
#include "resnet_forge/optim.hpp"

namespace rforge {

struct TrainConfig {
    std::int64_t epochs = 30;
    std::int64_t batch_size = 64;
    std::uint64_t seed = 42;
    AdamHyper adam;
    PlateauConfig plateau;
    EarlyStopConfig early_stop;
    AugmentConfig augment;
    std::int64_t prefetch_depth = 0;
    // Record epoch_time_s as 0 so history.csv depends on the seed alone.
    bool deterministic = false;
    // When set, history.csv and best.ckpt are (re)written after every epoch.
    std::optional<std::filesystem::path> out_dir;
    std::function<void(const EpochRecord&)> on_epoch;

    void validate() const;
};

struct TrainResult {
    History history;
    // Weights of the epoch with the best validation loss.
    std::optional<Checkpoint> best;
    bool early_stopped = false;
    bool diverged = false;
    std::string error;  // set when diverged
    // Mini-batch training loss of every optimizer step, in order.
    std::vector<double> step_losses;
};

// Per epoch: augmented train pass (train mode) with sample-weighted running
// loss/accuracy, validation pass (eval mode), plateau update, early-stop
// update, best checkpoint. A non-finite loss or gradient ends the run with
// diverged = true and the history so far.
TrainResult train_model(Model& model, const ImageSplit& train, const ImageSplit& val, const TrainConfig& cfg);

struct GradFlowRow {
    std::string layer;
    std::int64_t depth = 0;  // 0-based forward position among parameter-bearing layers
    double grad_l2 = 0.0;
};

struct GradFlowRecord {
    std::vector<GradFlowRow> rows;

    // Header layer,depth,grad_l2.
    std::string to_csv() const;
    // norm(first layer) / norm(last layer); infinity when the last is 0.
    double vanishing_ratio() const;
};

// One forward/backward on a fixed batch with batch norm on batch statistics
// (running statistics untouched) and dropout disabled. Each row is the L2
// norm over all parameter gradients of one layer.
GradFlowRecord gradient_flow_probe(Model& model, const Tensor& images, const Tensor& onehot);

// `batch` examples drawn without replacement by the probe stream, no augmentation.
Batch make_probe_batch(const ImageSplit& split, std::int64_t batch, std::uint64_t seed, DType dtype);

}  // namespace rforge
