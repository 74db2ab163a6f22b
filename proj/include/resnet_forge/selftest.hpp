// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "resnet_forge/autograd.hpp"

namespace rforge {

struct GradCheckResult {
    std::string layer_type;
    double max_rel_error = 0.0;
    std::string worst_param;
    std::int64_t coords = 0;
    std::int64_t zero_coords = 0;    // below finite-difference resolution
    std::int64_t kinks_skipped = 0;  // probes that crossed a ReLU / max-pool switch
    bool passed = false;
};

struct GradCheckOptions {
    double epsilon = 1e-5;
    double tolerance = 1e-4;
    std::int64_t coords_per_param = 64;
    std::uint64_t seed = 42;
    // Also check the whole Mini-ResNet on a 4x16x16x3 batch (the slow part).
    bool include_full_model = true;
};

// Finite-difference checks in double precision, one per layer type: conv,
// batchnorm, relu, dense, dropout, maxpool, global_avg_pool, the three
// residual block shortcuts, softmax cross-entropy, and the conv+BN+ReLU+dense
// stack; optionally the full Mini-ResNet.
std::vector<GradCheckResult> run_gradient_checks(const GradCheckOptions& options = {});

// Runs one named check from the list above ("mini_resnet" for the full model).
GradCheckResult run_gradient_check(const std::string& layer_type, const GradCheckOptions& options = {});

std::vector<std::string> gradient_check_names(bool include_full_model = true);

struct OracleCheckResult {
    std::string name;
    std::int64_t trials = 0;
    double max_abs_diff = 0.0;
    bool passed = false;  // bit-exact on every trial
};

// Fast conv2d against a direct nested-loop convolution on random small shapes
// (batch <= 2, spatial <= 8, channels <= 4, kernels <= 3), double precision.
OracleCheckResult run_conv_oracle_check(std::int64_t trials = 50, std::uint64_t seed = 42);

}  // namespace rforge
