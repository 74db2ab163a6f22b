// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "resnet_forge/models.hpp"

using namespace rforge;

namespace {

// Hand layer walk: conv k*k*in*out + out, BN 2C, dense in*out + out.
std::int64_t walk_resnet(std::int64_t stem, const std::array<std::int64_t, 4>& filters,
                         const std::array<bool, 4>& projection) {
    using oracle::conv_bn;
    std::int64_t total = conv_bn(3, 3, stem);
    std::int64_t in = stem;
    for (int s = 0; s < 4; ++s) {
        const auto out = filters[s];
        total += conv_bn(3, in, out) + conv_bn(3, out, out);  // block 1
        if (projection[s]) total += conv_bn(1, in, out);
        total += 2 * conv_bn(3, out, out);  // block 2
        in = out;
    }
    return total + in * 10 + 10;
}

const std::set<std::string>& projection_groups() {
    static const std::set<std::string> g = {"stage2.block1", "stage3.block1", "stage4.block1"};
    return g;
}

}  // namespace

TEST(ParamCount, BaselineMatchesLayerWalk) {
    const std::int64_t walk = 896 + 18'496 + 73'856 + 295'168 + 2 * (32 + 64 + 128 + 256) + 2'570;
    EXPECT_EQ(walk, 391'946);
    const auto pc = count_parameters(build_baseline_cnn());
    EXPECT_EQ(pc.trainable, walk);
    EXPECT_EQ(pc.non_trainable, 960);
}

TEST(ParamCount, ResidualModelsMatchLayerWalk) {
    EXPECT_EQ(count_parameters(build_mini_resnet()).trainable, walk_resnet(32, {32, 64, 128, 256}, {1, 1, 1, 1}));
    EXPECT_EQ(count_parameters(build_mini_resnet()).trainable, 2'801'130);
    EXPECT_EQ(count_parameters(build_resnet18(true)).trainable, walk_resnet(64, {64, 128, 256, 512}, {0, 1, 1, 1}));
    EXPECT_EQ(count_parameters(build_resnet18(true)).trainable, 11'178'762);
    EXPECT_EQ(count_parameters(build_resnet18(false)).trainable, walk_resnet(64, {64, 128, 256, 512}, {0, 0, 0, 0}));
    EXPECT_EQ(count_parameters(build_resnet18(false)).trainable, 11'004'042);
}

TEST(ParamCount, SkipAblationRemovesExactlyTheProjectionGroups) {
    const auto diff = count_parameters(build_resnet18(true)).trainable - count_parameters(build_resnet18(false)).trainable;
    EXPECT_EQ(diff, 174'720);
    EXPECT_EQ(diff, oracle::conv_bn(1, 64, 128) + oracle::conv_bn(1, 128, 256) + oracle::conv_bn(1, 256, 512));
    EXPECT_EQ(oracle::conv_bn(1, 64, 128), 8'576);
    EXPECT_EQ(oracle::conv_bn(1, 128, 256), 33'536);
    EXPECT_EQ(oracle::conv_bn(1, 256, 512), 132'608);
}

TEST(ParamCount, AlternateReadingsAreRecorded) {
    // Projection in ResNet-18 stage 1 and no downsampling in Mini-ResNet stage 1.
    EXPECT_EQ(walk_resnet(64, {64, 128, 256, 512}, {1, 1, 1, 1}), 11'183'050);
    EXPECT_EQ(walk_resnet(32, {32, 64, 128, 256}, {0, 1, 1, 1}), 2'800'010);
}

TEST(ParamCount, SingleDense) {
    ModelSpec spec;
    spec.layers.push_back(DenseSpec{"d", 256, 10});
    const auto pc = count_parameters(spec);
    EXPECT_EQ(pc.trainable, 2'570);
    EXPECT_EQ(pc.non_trainable, 0);
}

TEST(ParamCount, RoundsToThreeSignificantFigures) {
    EXPECT_EQ(format_param_count(count_parameters(build_baseline_cnn()).trainable), "392k");
    EXPECT_EQ(format_param_count(count_parameters(build_mini_resnet()).trainable), "2.80M");
    EXPECT_EQ(format_param_count(count_parameters(build_resnet18(true)).trainable), "11.2M");
    EXPECT_EQ(format_param_count(count_parameters(build_resnet18(false)).trainable), "11.0M");
    EXPECT_EQ(round_significant(2'801'130, 2), 2'800'000);
    EXPECT_EQ(round_significant(391'946, 3), 392'000);
}

TEST(Summary, TotalsMatchCountsForAllModels) {
    for (const auto& name : {"baseline", "mini_resnet", "resnet18", "resnet18_noskip"}) {
        const auto spec = build_model(name);
        const auto s = model_summary(spec);
        const auto pc = count_parameters(spec);
        EXPECT_EQ(s.total_trainable, pc.trainable) << name;
        EXPECT_EQ(s.total_non_trainable, pc.non_trainable) << name;
        std::int64_t rows = 0;
        for (const auto& r : s.rows) rows += r.trainable;
        EXPECT_EQ(rows, s.total_trainable);
    }
}

TEST(Summary, BaselineShapesAndRows) {
    const auto spec = build_baseline_cnn();
    const auto s = model_summary(spec);
    EXPECT_EQ(s.rows.size(), spec.layers.size());
    std::map<std::string, std::vector<std::int64_t>> shape;
    for (const auto& r : s.rows) shape[r.layer] = r.output_shape;
    EXPECT_EQ(shape["block1.pool"], (std::vector<std::int64_t>{16, 16, 32}));
    EXPECT_EQ(shape["block2.pool"], (std::vector<std::int64_t>{8, 8, 64}));
    EXPECT_EQ(shape["block3.pool"], (std::vector<std::int64_t>{4, 4, 128}));
    EXPECT_EQ(shape["block4.pool"], (std::vector<std::int64_t>{2, 2, 256}));
    EXPECT_EQ(shape["gap"], (std::vector<std::int64_t>{256}));
    EXPECT_EQ(shape["head.dense"], (std::vector<std::int64_t>{10}));
}

TEST(Summary, SpatialChains) {
    auto last_shape_of_stage = [](const ModelSummary& s, const std::string& stage) {
        std::vector<std::int64_t> out;
        for (const auto& r : s.rows)
            if (r.layer.starts_with(stage)) out = r.output_shape;
        return out;
    };
    const auto mini = model_summary(build_mini_resnet());
    EXPECT_EQ(last_shape_of_stage(mini, "stem"), (std::vector<std::int64_t>{32, 32, 32}));
    EXPECT_EQ(last_shape_of_stage(mini, "stage1"), (std::vector<std::int64_t>{16, 16, 32}));
    EXPECT_EQ(last_shape_of_stage(mini, "stage4"), (std::vector<std::int64_t>{2, 2, 256}));
    const auto r18 = model_summary(build_resnet18(true));
    EXPECT_EQ(last_shape_of_stage(r18, "stage1"), (std::vector<std::int64_t>{32, 32, 64}));
    EXPECT_EQ(last_shape_of_stage(r18, "stage2"), (std::vector<std::int64_t>{16, 16, 128}));
    EXPECT_EQ(last_shape_of_stage(r18, "stage4"), (std::vector<std::int64_t>{4, 4, 512}));
}

TEST(Summary, EmptySpecHasZeroTotals) {
    ModelSpec spec;
    spec.name = "empty";
    const auto s = model_summary(spec);
    EXPECT_TRUE(s.rows.empty());
    EXPECT_EQ(s.total_trainable, 0);
    EXPECT_EQ(s.total_non_trainable, 0);
}

TEST(Summary, CsvAndTextFormats) {
    const auto s = model_summary(build_baseline_cnn());
    const auto csv = s.to_csv();
    EXPECT_TRUE(csv.starts_with("layer,output_shape,trainable,non_trainable\nblock1.conv,32x32x32,896,0\n"));
    EXPECT_NE(s.to_text().find("Trainable params: 391946 (392k)"), std::string::npos);
}

TEST(Summary, BrokenWiringIsASpecError) {
    auto spec = build_baseline_cnn();
    std::get<ConvSpec>(spec.layers[4]).in = 16;
    EXPECT_THROW(model_summary(spec), SpecError);
}

TEST(BuildModel, UnknownNameIsRejected) {
    EXPECT_THROW(build_model("resnet50"), ContractError);
}

TEST(SkipFlag, ChangesOnlyShortcutWiring) {
    Model with(build_resnet18(true), DType::f32, 42);
    Model without(build_resnet18(false), DType::f32, 42);
    for (const auto& p : with.parameters().all()) {
        const auto* q = without.parameters().find(p.name);
        const bool projection = p.name.find(".shortcut.") != std::string::npos;
        if (projection) {
            EXPECT_EQ(q, nullptr) << p.name;
            EXPECT_TRUE(projection_groups().contains(p.name.substr(0, p.name.find(".shortcut."))));
            continue;
        }
        ASSERT_NE(q, nullptr) << p.name;
        // Per-name init streams: shared branches start from identical weights.
        EXPECT_TRUE(p.value.bit_equal(q->value)) << p.name;
    }
    EXPECT_EQ(with.parameters().size(), without.parameters().size() + 3 * 6);
}

TEST(Forward, AllModelsProduceFiniteLogits) {
    Tensor x({2, 32, 32, 3}, DType::f32);
    RngStream rng(5);
    for (auto& v : x.data<float>()) v = static_cast<float>(rng.uniform(-1, 1));
    for (const auto& name : {"baseline", "mini_resnet", "resnet18", "resnet18_noskip"}) {
        Model m(build_model(name), DType::f32, 1);
        const auto logits = m.predict(x);
        EXPECT_EQ(logits.shape(), Shape({2, 10})) << name;
        EXPECT_TRUE(logits.all_finite()) << name;
    }
}

TEST(Model, ParameterLayersInForwardOrder) {
    Model m(build_mini_resnet(), DType::f32, 1);
    const auto layers = m.parameter_layers();
    ASSERT_FALSE(layers.empty());
    EXPECT_EQ(layers.front().name, "stem.conv");
    EXPECT_EQ(layers.back().name, "head.dense");
    std::int64_t tensors = 0;
    for (const auto& l : layers) {
        for (const auto& p : l.params) EXPECT_TRUE(m.parameters().contains(p)) << p;
        tensors += static_cast<std::int64_t>(l.params.size());
    }
    EXPECT_EQ(tensors, static_cast<std::int64_t>(m.parameters().size()) - 2 * (1 + 8 * 2 + 4));
}
