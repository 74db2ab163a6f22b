// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "resnet_forge/layers.hpp"

namespace rforge {

struct ConvSpec {
    std::string name;
    std::int64_t kernel = 3;
    std::int64_t in = 0;
    std::int64_t out = 0;
    std::int64_t stride = 1;
};
struct BatchNormSpec {
    std::string name;
    std::int64_t channels = 0;
};
struct ReluSpec {
    std::string name;
};
struct MaxPoolSpec {
    std::string name;
    std::int64_t window = 2;
    std::int64_t stride = 2;
};
struct GlobalAvgPoolSpec {
    std::string name;
};
struct DropoutSpec {
    std::string name;
    double p = 0.5;
};
struct DenseSpec {
    std::string name;
    std::int64_t in = 0;
    std::int64_t out = 0;
};
struct ResidualBlockLayer {
    std::string name;
    ResidualBlockSpec block;
};

using LayerSpec =
    std::variant<ConvSpec, BatchNormSpec, ReluSpec, MaxPoolSpec, GlobalAvgPoolSpec, DropoutSpec, DenseSpec, ResidualBlockLayer>;

const std::string& layer_name(const LayerSpec& layer);

struct ModelSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    std::int64_t num_classes = 10;
    double dropout_p = 0.5;
    bool skip_connections = true;
    // H, W, C of one input image.
    std::array<std::int64_t, 3> input = {32, 32, 3};
};

ModelSpec build_baseline_cnn(std::int64_t num_classes = 10);
ModelSpec build_mini_resnet(std::int64_t num_classes = 10);
ModelSpec build_resnet18(bool skip, std::int64_t num_classes = 10);

// Looks up a builder by CLI name: baseline, mini_resnet, resnet18,
// resnet18_noskip. Throws ContractError for anything else.
ModelSpec build_model(const std::string& name, std::int64_t num_classes = 10);

struct ParamCount {
    std::int64_t trainable = 0;
    std::int64_t non_trainable = 0;
};

ParamCount count_parameters(const ModelSpec& spec);

struct SummaryRow {
    std::string layer;
    std::vector<std::int64_t> output_shape;  // without the batch dim
    std::int64_t trainable = 0;
    std::int64_t non_trainable = 0;
    std::int64_t tensors = 0;  // parameter tensors owned by this row
};

struct ModelSummary {
    std::string model;
    std::vector<SummaryRow> rows;
    std::int64_t total_trainable = 0;
    std::int64_t total_non_trainable = 0;

    std::string to_text() const;
    // Header: layer,output_shape,trainable,non_trainable
    std::string to_csv() const;
};

// Walks the spec layer by layer (residual blocks expanded into their
// sub-layers), checking that shapes chain for spec.input.
ModelSummary model_summary(const ModelSpec& spec);

// A spec with instantiated parameters.
class Model {
public:
    explicit Model(ModelSpec spec, DType dtype = DType::f32, std::uint64_t seed = 42);

    const ModelSpec& spec() const noexcept { return spec_; }
    DType dtype() const noexcept { return dtype_; }
    ParameterStore& parameters() noexcept { return params_; }
    const ParameterStore& parameters() const noexcept { return params_; }

    // Logits [N, num_classes].
    Var forward(ForwardContext& ctx, Var images);

    // Eval-mode logits without keeping a tape around.
    Tensor predict(const Tensor& images);

    // Names of parameter-bearing layers in forward order, each with the
    // parameter names it owns.
    struct ParamLayer {
        std::string name;
        std::vector<std::string> params;
    };
    std::vector<ParamLayer> parameter_layers() const;

private:
    ModelSpec spec_;
    DType dtype_;
    ParameterStore params_;
};

// Rounds to `digits` significant figures: 2801130 -> 2800000.
double round_significant(double x, int digits);
// Three significant figures in k/M units: 391946 -> "392k", 2801130 -> "2.80M".
std::string format_param_count(std::int64_t n);

}  // namespace rforge
