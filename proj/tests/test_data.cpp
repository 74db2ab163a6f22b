// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "resnet_forge/data.hpp"

using namespace rforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / ("rforge_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

RawRecord gradient_record(std::uint8_t label) {
    RawRecord r;
    r.label = label;
    for (std::size_t i = 0; i < r.pixels.size(); ++i) r.pixels[i] = static_cast<std::uint8_t>(i % 251);
    return r;
}

std::vector<std::vector<std::int64_t>> collect_indices(const ImageSplit& split, const PipelineConfig& cfg,
                                                       const AugmentConfig& aug, std::int64_t epoch) {
    BatchStream s(split, cfg, aug, epoch);
    std::vector<std::vector<std::int64_t>> out;
    while (auto b = s.next()) out.push_back(b->indices);
    return out;
}

}  // namespace

class CifarFiles : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new fs::path(scratch_dir("cifar"));
        write_synthetic_cifar_dir(*dir_, 7);
    }
    static void TearDownTestSuite() {
        fs::remove_all(*dir_);
        delete dir_;
    }
    static fs::path* dir_;
};
fs::path* CifarFiles::dir_ = nullptr;

TEST_F(CifarFiles, LoadsSixtyThousandRecords) {
    const auto ds = load_cifar10(*dir_);
    EXPECT_EQ(ds.train.size(), 50'000u);
    EXPECT_EQ(ds.test.size(), 10'000u);
    EXPECT_EQ(fs::file_size(*dir_ / "data_batch_3.bin"), 30'730'000u);
}

TEST_F(CifarFiles, BytePassThrough) {
    const auto recs = read_cifar_file(*dir_ / "data_batch_2.bin");
    std::ifstream f(*dir_ / "data_batch_2.bin", std::ios::binary);
    std::vector<char> head(3073 * 2);
    f.read(head.data(), static_cast<std::streamsize>(head.size()));
    EXPECT_EQ(recs[1].label, static_cast<std::uint8_t>(head[3073]));
    for (int i = 0; i < 3072; ++i) ASSERT_EQ(recs[1].pixels[i], static_cast<std::uint8_t>(head[3074 + i]));
}

TEST(CifarLoader, MissingFileIsIoError) {
    const auto d = scratch_dir("missing");
    EXPECT_THROW(read_cifar_file(d / "data_batch_1.bin"), IoError);
    EXPECT_THROW(load_cifar10(d), IoError);
    fs::remove_all(d);
}

TEST(CifarLoader, TruncatedFileIsFormatErrorNamingTheFile) {
    const auto d = scratch_dir("trunc");
    std::vector<RawRecord> recs(10'000, gradient_record(3));
    write_cifar_file(d / "data_batch_1.bin", recs);
    fs::resize_file(d / "data_batch_1.bin", 30'729'999);
    try {
        read_cifar_file(d / "data_batch_1.bin");
        FAIL() << "expected FormatError";
    } catch (const CorruptRecordError&) {
        FAIL() << "wrong error kind";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("data_batch_1.bin"), std::string::npos);
    }
    fs::remove_all(d);
}

TEST(CifarLoader, BadLabelIsCorruptRecordWithIndex) {
    const auto d = scratch_dir("label");
    std::vector<RawRecord> recs(10'000, gradient_record(3));
    recs[4321].label = 10;
    write_cifar_file(d / "data_batch_1.bin", recs);
    try {
        read_cifar_file(d / "data_batch_1.bin");
        FAIL() << "expected CorruptRecordError";
    } catch (const CorruptRecordError& e) {
        EXPECT_EQ(e.record_index(), 4321u);
    }
    fs::remove_all(d);
}

TEST(CifarLoader, RepeatedRecordLoadsIdentically) {
    const auto d = scratch_dir("repeat");
    const auto rec = gradient_record(9);
    write_cifar_file(d / "test_batch.bin", std::vector<RawRecord>(10'000, rec));
    for (const auto& r : read_cifar_file(d / "test_batch.bin")) {
        ASSERT_EQ(r.label, 9);
        ASSERT_EQ(r.pixels, rec.pixels);
    }
    fs::remove_all(d);
}

TEST(Normalize, Endpoints) {
    EXPECT_EQ(normalize_byte(0), -1.0);
    EXPECT_EQ(normalize_byte(255), 1.0);
    EXPECT_NEAR(normalize_byte(128), 0.00392157, 1e-8);
    EXPECT_EQ(normalize_byte(128), (128.0 / 255.0 - 0.5) / 0.5);
}

TEST(Normalize, PlanarToHwc) {
    RawRecord r;
    // R plane 10, G plane 20, B plane 30, except pixel (1,2) whose R is 255.
    std::fill(r.pixels.begin(), r.pixels.begin() + 1024, 10);
    std::fill(r.pixels.begin() + 1024, r.pixels.begin() + 2048, 20);
    std::fill(r.pixels.begin() + 2048, r.pixels.end(), 30);
    r.pixels[1 * 32 + 2] = 255;
    const auto t = normalize(r, DType::f64);
    EXPECT_EQ(t.shape(), Shape({32, 32, 3}));
    EXPECT_EQ(t.at(0), normalize_byte(10));
    EXPECT_EQ(t.at(1), normalize_byte(20));
    EXPECT_EQ(t.at(2), normalize_byte(30));
    EXPECT_EQ(t.at((1 * 32 + 2) * 3), 1.0);
}

TEST(OneHot, Examples) {
    EXPECT_EQ(one_hot(3), (std::vector<double>{0, 0, 0, 1, 0, 0, 0, 0, 0, 0}));
    EXPECT_EQ(one_hot(0)[0], 1.0);
    EXPECT_THROW(one_hot(10), ContractError);
    EXPECT_THROW(one_hot(-1), ContractError);
}

TEST(Augment, FlipTwiceIsIdentity) {
    std::vector<double> img(4 * 5 * 3);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i) / 100.0;
    auto copy = img;
    augment(img, 4, 5, 3, {true, 0.0});
    EXPECT_NE(img, copy);
    EXPECT_EQ(img[0], copy[4 * 3]);  // column 0 <- column 4
    augment(img, 4, 5, 3, {true, 0.0});
    EXPECT_EQ(img, copy);
}

TEST(Augment, ZeroDeltaNoFlipIsUnchanged) {
    std::vector<double> img(2 * 2 * 3, 0.37);
    auto copy = img;
    augment(img, 2, 2, 3, {false, 0.0});
    EXPECT_EQ(img, copy);
}

TEST(Augment, BrightnessClips) {
    std::vector<double> img(3 * 3 * 3, 0.95);
    augment(img, 3, 3, 3, {false, 0.1});
    for (double v : img) EXPECT_EQ(v, 1.0);
    std::vector<double> dark(3, 0.05);
    augment(dark, 1, 1, 3, {false, -0.1});
    for (double v : dark) EXPECT_EQ(v, 0.0);
}

TEST(Augment, DecisionsStayInRange) {
    AugmentConfig cfg;
    RngStream rng(1, streams::augment);
    int flips = 0;
    for (int i = 0; i < 10'000; ++i) {
        const auto d = draw_augmentation(cfg, rng);
        flips += d.flip;
        EXPECT_LE(std::abs(d.delta), 0.1);
    }
    EXPECT_NEAR(flips / 10'000.0, 0.5, 0.03);
    AugmentConfig bad;
    bad.flip_prob = 1.5;
    EXPECT_THROW(bad.validate(), ContractError);
}

TEST(Pipeline, RemainderBatch) {
    const auto split = make_synthetic_split(150, 4, 8, 1);
    PipelineConfig cfg;
    const auto idx = collect_indices(split, cfg, {}, 0);
    ASSERT_EQ(idx.size(), 3u);
    EXPECT_EQ(idx[0].size(), 64u);
    EXPECT_EQ(idx[1].size(), 64u);
    EXPECT_EQ(idx[2].size(), 22u);
    EXPECT_EQ(BatchStream(split, cfg, {}, 0).num_batches(), 3);
}

TEST(Pipeline, EpochIsAPermutationOfTheSplit) {
    const auto split = make_synthetic_split(300, 10, 8, 2);
    PipelineConfig cfg;
    for (std::int64_t epoch : {0, 1, 5}) {
        std::vector<std::int64_t> all;
        for (const auto& b : collect_indices(split, cfg, {}, epoch)) all.insert(all.end(), b.begin(), b.end());
        std::sort(all.begin(), all.end());
        std::vector<std::int64_t> want(300);
        std::iota(want.begin(), want.end(), 0);
        EXPECT_EQ(all, want);
    }
}

TEST(Pipeline, SameSeedSameBatchesBitExact) {
    const auto split = make_synthetic_split(100, 4, 8, 3);
    PipelineConfig cfg;
    cfg.batch_size = 16;
    BatchStream a(split, cfg, {}, 2), b(split, cfg, {}, 2);
    while (true) {
        auto x = a.next();
        auto y = b.next();
        ASSERT_EQ(x.has_value(), y.has_value());
        if (!x) break;
        EXPECT_TRUE(x->images.bit_equal(y->images));
        EXPECT_EQ(x->labels, y->labels);
    }
}

TEST(Pipeline, EpochsShuffleDifferently) {
    EXPECT_NE(epoch_permutation(1000, 42, 0), epoch_permutation(1000, 42, 1));
    EXPECT_EQ(epoch_permutation(1000, 42, 3), epoch_permutation(1000, 42, 3));
    EXPECT_NE(epoch_permutation(1000, 42, 0), epoch_permutation(1000, 43, 0));
}

TEST(Pipeline, PrefetchMatchesSequential) {
    const auto split = make_synthetic_split(200, 4, 8, 4);
    PipelineConfig seq;
    seq.batch_size = 32;
    PipelineConfig pre = seq;
    pre.prefetch_depth = 3;
    BatchStream a(split, seq, {}, 1), b(split, pre, {}, 1);
    int n = 0;
    while (auto x = a.next()) {
        auto y = b.next();
        ASSERT_TRUE(y.has_value());
        EXPECT_TRUE(x->images.bit_equal(y->images));
        EXPECT_EQ(x->indices, y->indices);
        ++n;
    }
    EXPECT_FALSE(b.next().has_value());
    EXPECT_EQ(n, 7);
}

TEST(Pipeline, PrefetchStreamCanBeAbandonedEarly) {
    const auto split = make_synthetic_split(200, 4, 8, 4);
    PipelineConfig pre;
    pre.batch_size = 8;
    pre.prefetch_depth = 2;
    BatchStream s(split, pre, {}, 0);
    EXPECT_TRUE(s.next().has_value());
}

TEST(Pipeline, ImagesInRangeAndOneHotRows) {
    const auto split = make_synthetic_split(64, 4, 8, 5);
    PipelineConfig cfg;
    BatchStream s(split, cfg, {}, 0);
    auto b = s.next();
    ASSERT_TRUE(b);
    for (double v : b->images.to_vector()) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
    for (std::int64_t i = 0; i < 64; ++i) {
        double sum = 0;
        for (int k = 0; k < 4; ++k) sum += b->onehot.at(i * 4 + k);
        EXPECT_EQ(sum, 1.0);
        EXPECT_EQ(b->onehot.at(i * 4 + b->labels[i]), 1.0);
    }
}

TEST(Pipeline, DisabledAugmentationIsBitExactNoOp) {
    const auto split = make_synthetic_split(10, 2, 8, 6);
    AugmentConfig off;
    off.enabled = false;
    std::vector<std::int64_t> idx = {3, 7};
    const auto b = make_batch(split, idx, off, 1, 0, DType::f64);
    for (std::int64_t i = 0; i < 2; ++i) {
        const auto img = split.image(idx[i]);
        for (std::size_t p = 0; p < img.size(); ++p)
            ASSERT_EQ(b.images.at(i * static_cast<std::int64_t>(img.size()) + static_cast<std::int64_t>(p)),
                      normalize_byte(img[p]));
    }
}

TEST(Pipeline, AugmentationDependsOnExampleNotBatchPosition) {
    const auto split = make_synthetic_split(10, 2, 8, 6);
    AugmentConfig aug;
    const std::vector<std::int64_t> a = {4, 1}, b = {1, 9, 4};
    const auto x = make_batch(split, a, aug, 3, 2, DType::f64), y = make_batch(split, b, aug, 3, 2, DType::f64);
    const std::int64_t img = 8 * 8 * 3;
    for (std::int64_t p = 0; p < img; ++p) ASSERT_EQ(x.images.at(p), y.images.at(2 * img + p));
}

TEST(Synthetic, BalancedDeterministicSeparated) {
    const auto s = make_synthetic_split(64, 4, 16, 9);
    EXPECT_EQ(s.class_counts(), (std::vector<std::int64_t>{16, 16, 16, 16}));
    const auto t = make_synthetic_split(64, 4, 16, 9);
    EXPECT_EQ(s.pixels, t.pixels);
    EXPECT_NE(s.pixels, make_synthetic_split(64, 4, 16, 10).pixels);

    // Per-class mean of each (half, channel) region; every pair of classes
    // differs by at least offset/2 in some region.
    std::vector<std::array<double, 6>> mean(4, std::array<double, 6>{});
    for (std::int64_t i = 0; i < 64; ++i) {
        const auto img = s.image(i);
        for (std::int64_t y = 0; y < 16; ++y)
            for (std::int64_t x = 0; x < 16; ++x)
                for (int c = 0; c < 3; ++c)
                    mean[s.labels[i]][(y < 8 ? 0 : 3) + c] += img[(y * 16 + x) * 3 + c] / (16.0 * 128.0);
    }
    const double offset = SyntheticConfig{}.offset;
    for (int c = 0; c < 4; ++c)
        for (int d = c + 1; d < 4; ++d) {
            double best = 0;
            for (int r = 0; r < 6; ++r) best = std::max(best, std::abs(mean[c][r] - mean[d][r]));
            EXPECT_GE(best, offset / 2) << c << " vs " << d;
        }
}

TEST(Holdout, DisjointDeterministicSizes) {
    const auto full = make_synthetic_split(1000, 10, 4, 11);
    auto tag = [](const ImageSplit& s) {
        std::multiset<std::vector<std::uint8_t>> m;
        for (std::int64_t i = 0; i < s.size(); ++i) {
            auto img = s.image(i);
            m.insert({img.begin(), img.end()});
        }
        return m;
    };
    const auto a = holdout_split(full, 100, 42), b = holdout_split(full, 100, 42);
    EXPECT_EQ(a.train.size(), 900);
    EXPECT_EQ(a.val.size(), 100);
    EXPECT_EQ(a.val.pixels, b.val.pixels);
    auto all = tag(a.train);
    auto val = tag(a.val);
    all.insert(val.begin(), val.end());
    EXPECT_EQ(all, tag(full));
    EXPECT_NE(holdout_split(full, 100, 43).val.pixels, a.val.pixels);
}
