// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "resnet_forge/layers.hpp"

using namespace rforge;

namespace {

constexpr DType f64 = DType::f64;

Tensor random_tensor(const Shape& s, std::uint64_t seed, double lo = -1, double hi = 1) {
    std::mt19937_64 rng(seed);
    return Tensor::from(s, oracle::random_vector(static_cast<std::size_t>(s.numel()), rng, lo, hi), f64);
}

void zero_params(ParameterStore& store, std::string_view suffix) {
    for (auto& p : store.all())
        if (p.name.ends_with(suffix)) p.value = Tensor::zeros(p.value.shape(), p.value.dtype());
}

struct Harness {
    Tape tape;
    ParameterStore store;
    ForwardContext ctx{tape, store, LayerMode::train};
};

}  // namespace

TEST(ConvLayer, ZeroKernelGivesZero) {
    Harness h;
    layers::add_conv_params(h.store, "c", 3, 2, 3, f64, 1);
    zero_params(h.store, ".kernel");
    Var y = layers::conv(h.ctx, h.tape.input(random_tensor({1, 4, 4, 2}, 1)), "c", 1);
    for (double v : h.tape.value(y).to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(ConvLayer, OneByOneIdentityKernelPassesThrough) {
    Harness h;
    layers::add_conv_params(h.store, "c", 1, 1, 1, f64, 1);
    h.store.get("c.kernel").value = Tensor::full({1, 1, 1, 1}, 1.0, f64);
    auto x = random_tensor({2, 3, 3, 1}, 2);
    EXPECT_TRUE(h.tape.value(layers::conv(h.ctx, h.tape.input(x), "c", 1)).bit_equal(x));
}

TEST(ConvLayer, MatchesTensorCoreConv) {
    Harness h;
    layers::add_conv_params(h.store, "c", 3, 3, 5, f64, 7);
    h.store.get("c.bias").value = random_tensor({5}, 8);
    auto x = random_tensor({2, 6, 6, 3}, 3);
    auto want = ops::conv2d(x, h.store.get("c.kernel").value, h.store.get("c.bias").value, 2, Padding::same);
    EXPECT_TRUE(h.tape.value(layers::conv(h.ctx, h.tape.input(x), "c", 2)).bit_equal(want));
}

TEST(ConvLayer, HeNormalInitStatistics) {
    ParameterStore s;
    layers::add_conv_params(s, "c", 3, 64, 128, DType::f32, 42);
    auto k = s.get("c.kernel").value.to_vector();
    double sum = 0, sq = 0;
    for (double v : k) sum += v, sq += v * v;
    const double n = static_cast<double>(k.size()), mean = sum / n, var = sq / n - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.005);
    EXPECT_NEAR(var, 2.0 / (9 * 64), 0.05 * 2.0 / (9 * 64));
    for (double v : s.get("c.bias").value.to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, ConstantInputGivesBeta) {
    Harness h;
    layers::add_batchnorm_params(h.store, "bn", 2, f64);
    h.store.get("bn.gamma").value = Tensor::from({2}, {3.0, -2.0}, f64);
    h.store.get("bn.beta").value = Tensor::full({2}, 0.25, f64);
    auto y = h.tape.value(layers::batchnorm(h.ctx, h.tape.input(Tensor::full({2, 2, 2, 2}, 5.0, f64)), "bn"));
    for (double v : y.to_vector()) EXPECT_EQ(v, 0.25);
}

TEST(BatchNorm, TwoValueChannel) {
    Harness h;
    layers::add_batchnorm_params(h.store, "bn", 1, f64);
    auto y = h.tape.value(layers::batchnorm(h.ctx, h.tape.input(Tensor::from({2, 1, 1, 1}, {1, 3}, f64)), "bn"));
    const double want = 1.0 / std::sqrt(1.001);
    EXPECT_NEAR(y.at(0), -want, 1e-15);
    EXPECT_NEAR(y.at(1), want, 1e-15);
    EXPECT_NEAR(want, 0.99950, 5e-6);
    // running <- 0.99 running + 0.01 batch (biased variance 1)
    EXPECT_NEAR(h.store.get("bn.running_mean").value.at(0), 0.02, 1e-15);
    EXPECT_NEAR(h.store.get("bn.running_var").value.at(0), 0.99 + 0.01, 1e-15);
}

TEST(BatchNorm, EvalUsesRunningStatistics) {
    Harness h;
    layers::add_batchnorm_params(h.store, "bn", 3, f64);
    h.ctx.mode = LayerMode::eval;
    auto x = random_tensor({2, 2, 2, 3}, 4);
    auto y = h.tape.value(layers::batchnorm(h.ctx, h.tape.input(x), "bn"));
    for (std::int64_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y.at(i), x.at(i) / std::sqrt(1.001), 1e-15);
    EXPECT_EQ(h.store.get("bn.running_mean").value.at(0), 0.0);
}

TEST(BatchNorm, TrainOutputIsStandardized) {
    Harness h;
    layers::add_batchnorm_params(h.store, "bn", 4, f64);
    auto y = h.tape.value(layers::batchnorm(h.ctx, h.tape.input(random_tensor({8, 5, 5, 4}, 5, -3, 7)), "bn"));
    for (int c = 0; c < 4; ++c) {
        double s = 0, sq = 0;
        for (int i = 0; i < 200; ++i) s += y.at(i * 4 + c);
        const double mean = s / 200;
        for (int i = 0; i < 200; ++i) sq += (y.at(i * 4 + c) - mean) * (y.at(i * 4 + c) - mean);
        EXPECT_LT(std::abs(mean), 1e-6);
        // Variance is var / (var + eps); within 1e-4 of 1 once eps is accounted for.
        EXPECT_NEAR(sq / 200, 1.0, 1e-3 / (1e-3 + 1.0) + 1e-4);
    }
}

TEST(BatchNorm, SingleValuePerChannelIsDegenerate) {
    Harness h;
    layers::add_batchnorm_params(h.store, "bn", 2, f64);
    EXPECT_THROW(layers::batchnorm(h.ctx, h.tape.input(Tensor::zeros({1, 1, 1, 2}, f64)), "bn"), DegenerateBatchError);
    h.ctx.mode = LayerMode::eval;
    EXPECT_NO_THROW(layers::batchnorm(h.ctx, h.tape.input(Tensor::zeros({1, 1, 1, 2}, f64)), "bn"));
}

TEST(BatchNorm, RunningStatsAreNotTrainable) {
    ParameterStore s;
    layers::add_batchnorm_params(s, "bn", 8, f64);
    EXPECT_TRUE(s.get("bn.gamma").trainable);
    EXPECT_FALSE(s.get("bn.running_mean").trainable);
    EXPECT_FALSE(s.get("bn.running_var").trainable);
    EXPECT_EQ(s.trainable_count(), 16);
    EXPECT_EQ(s.non_trainable_count(), 16);
}

TEST(Relu, ExamplesAndIdempotence) {
    Harness h;
    EXPECT_EQ(h.tape.value(layers::relu(h.ctx, h.tape.input(Tensor::from({3}, {-2, 0, 3}, f64)))).to_vector(),
              (std::vector<double>{0, 0, 3}));
    auto x = random_tensor({40}, 6);
    Var once = layers::relu(h.ctx, h.tape.input(x));
    EXPECT_TRUE(h.tape.value(layers::relu(h.ctx, once)).bit_equal(h.tape.value(once)));
}

TEST(Dense, Examples) {
    Harness h;
    layers::add_dense_params(h.store, "d", 3, 3, f64, 1);
    h.store.get("d.kernel").value = Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}, f64);
    auto x = random_tensor({2, 3}, 7);
    EXPECT_TRUE(h.tape.value(layers::dense(h.ctx, h.tape.input(x), "d")).bit_equal(x));

    Harness z;
    layers::add_dense_params(z.store, "d", 3, 2, f64, 1);
    zero_params(z.store, ".kernel");
    z.store.get("d.bias").value = Tensor::from({2}, {0.5, -1.5}, f64);
    EXPECT_EQ(z.tape.value(layers::dense(z.ctx, z.tape.input(x), "d")).to_vector(),
              (std::vector<double>{0.5, -1.5, 0.5, -1.5}));
}

TEST(Dense, MatchesMatmulPlusBias) {
    Harness h;
    layers::add_dense_params(h.store, "d", 6, 4, f64, 3);
    h.store.get("d.bias").value = random_tensor({4}, 9);
    auto x = random_tensor({5, 6}, 8);
    auto y = h.tape.value(layers::dense(h.ctx, h.tape.input(x), "d")).to_vector();
    auto mm = oracle::matmul(5, 4, 6, x.to_vector(), h.store.get("d.kernel").value.to_vector());
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_EQ(y[i * 4 + j], mm[i * 4 + j] + h.store.get("d.bias").value.at(j));
}

TEST(Dropout, EvalAndZeroRateAreIdentity) {
    Harness h;
    RngStream rng(1);
    h.ctx.dropout_rng = &rng;
    auto x = random_tensor({4, 4}, 10);
    EXPECT_TRUE(h.tape.value(layers::dropout(h.ctx, h.tape.input(x), 0.0)).bit_equal(x));
    h.ctx.mode = LayerMode::eval;
    EXPECT_TRUE(h.tape.value(layers::dropout(h.ctx, h.tape.input(x), 0.5)).bit_equal(x));
}

TEST(Dropout, InvertedScalingKeepsExpectation) {
    Harness h;
    RngStream rng(42, streams::dropout);
    h.ctx.dropout_rng = &rng;
    auto y = h.tape.value(layers::dropout(h.ctx, h.tape.input(Tensor::full({100000}, 1.0, f64)), 0.5)).to_vector();
    double s = 0;
    for (double v : y) {
        EXPECT_TRUE(v == 0.0 || v == 2.0);
        s += v;
    }
    EXPECT_GE(s / 1e5, 0.98);
    EXPECT_LE(s / 1e5, 1.02);
}

TEST(Dropout, RateOutsideRangeIsAContractError) {
    Harness h;
    RngStream rng(1);
    h.ctx.dropout_rng = &rng;
    Var x = h.tape.input(Tensor::zeros({2}, f64));
    EXPECT_THROW(layers::dropout(h.ctx, x, 1.0), ContractError);
    EXPECT_THROW(layers::dropout(h.ctx, x, -0.1), ContractError);
    h.ctx.dropout_rng = nullptr;
    EXPECT_THROW(layers::dropout(h.ctx, x, 0.5), ContractError);
}

TEST(ResidualBlockSpec, Validation) {
    EXPECT_NO_THROW((ResidualBlockSpec{64, 64, 1, Shortcut::identity}.validate()));
    EXPECT_THROW((ResidualBlockSpec{64, 128, 1, Shortcut::identity}.validate()), SpecError);
    EXPECT_THROW((ResidualBlockSpec{64, 64, 2, Shortcut::identity}.validate()), SpecError);
    EXPECT_NO_THROW((ResidualBlockSpec{64, 128, 2, Shortcut::projection}.validate()));
    EXPECT_NO_THROW((ResidualBlockSpec{64, 128, 2, Shortcut::none}.validate()));
}

TEST(ResidualBlock, ZeroBranchIdentityIsExactIdentityWithGradientPassthrough) {
    Harness h;
    const ResidualBlockSpec spec{4, 4, 1, Shortcut::identity};
    layers::add_residual_block_params(h.store, "b", spec, f64, 3);
    zero_params(h.store, ".kernel");
    auto x = random_tensor({2, 5, 5, 4}, 11, 0.01, 2.0);
    Var xv = h.tape.input(x, true);
    Var y = layers::residual_block(h.ctx, xv, spec, "b");
    EXPECT_TRUE(h.tape.value(y).bit_equal(x));

    auto upstream = random_tensor({2, 5, 5, 4}, 12);
    h.tape.backward(ag::sum(h.tape, ag::mul(h.tape, y, h.tape.input(upstream))));
    EXPECT_TRUE(h.tape.grad(xv)->bit_equal(upstream));
}

TEST(ResidualBlock, ProjectionDownsamplesShape) {
    Harness h;
    const ResidualBlockSpec spec{64, 128, 2, Shortcut::projection};
    layers::add_residual_block_params(h.store, "b", spec, DType::f32, 3);
    Var y = layers::residual_block(h.ctx, h.tape.input(Tensor::full({2, 32, 32, 64}, 0.5)), spec, "b");
    EXPECT_EQ(h.tape.value(y).shape(), Shape({2, 16, 16, 128}));
    EXPECT_TRUE(h.store.contains("b.shortcut.conv.kernel"));
    EXPECT_EQ(h.store.get("b.shortcut.conv.kernel").value.shape(), Shape({1, 1, 64, 128}));
}

TEST(ResidualBlock, NoShortcutWithZeroBranchIsZero) {
    Harness h;
    const ResidualBlockSpec spec{3, 3, 1, Shortcut::none};
    layers::add_residual_block_params(h.store, "b", spec, f64, 3);
    zero_params(h.store, ".kernel");
    Var y = layers::residual_block(h.ctx, h.tape.input(random_tensor({2, 4, 4, 3}, 13, -5, 5)), spec, "b");
    for (double v : h.tape.value(y).to_vector()) EXPECT_EQ(v, 0.0);
}

TEST(ResidualBlock, ChannelMismatchIsAShapeError) {
    Harness h;
    const ResidualBlockSpec spec{4, 4, 1, Shortcut::identity};
    layers::add_residual_block_params(h.store, "b", spec, f64, 3);
    EXPECT_THROW(layers::residual_block(h.ctx, h.tape.input(Tensor::zeros({1, 4, 4, 3}, f64)), spec, "b"), ShapeError);
}
