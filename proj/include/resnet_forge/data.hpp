// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "resnet_forge/rng.hpp"
#include "resnet_forge/tensor.hpp"

namespace rforge {

namespace cifar {
inline constexpr std::int64_t kSide = 32;
inline constexpr std::int64_t kChannels = 3;
inline constexpr std::int64_t kPixels = kSide * kSide * kChannels;  // 3072
inline constexpr std::int64_t kRecordBytes = kPixels + 1;            // 3073
inline constexpr std::int64_t kRecordsPerFile = 10'000;
inline constexpr std::int64_t kFileBytes = kRecordBytes * kRecordsPerFile;  // 30,730,000
inline constexpr int kClasses = 10;
}  // namespace cifar

// One CIFAR-10 binary record: label byte, then R, G and B planes of 32x32
// row-major bytes.
struct RawRecord {
    std::uint8_t label = 0;
    std::array<std::uint8_t, cifar::kPixels> pixels{};
};

struct RawDataset {
    std::vector<RawRecord> train;  // data_batch_1..5 in file order
    std::vector<RawRecord> test;   // test_batch
};

// Reads one 10,000-record file. Throws IoError (missing/unreadable),
// FormatError (size) or CorruptRecordError (label > 9).
std::vector<RawRecord> read_cifar_file(const std::filesystem::path& path);
void write_cifar_file(const std::filesystem::path& path, std::span<const RawRecord> records);
RawDataset load_cifar10(const std::filesystem::path& dir);

// Images kept as H,W,C bytes plus labels; the pipeline converts per batch.
struct ImageSplit {
    std::int64_t height = cifar::kSide;
    std::int64_t width = cifar::kSide;
    std::int64_t channels = cifar::kChannels;
    int classes = cifar::kClasses;
    std::vector<std::uint8_t> pixels;
    std::vector<std::uint8_t> labels;

    std::int64_t size() const noexcept { return static_cast<std::int64_t>(labels.size()); }
    std::int64_t image_bytes() const noexcept { return height * width * channels; }
    std::span<const std::uint8_t> image(std::int64_t i) const;
    std::vector<std::int64_t> class_counts() const;
};

// Planar records -> H,W,C split.
ImageSplit to_split(std::span<const RawRecord> records);
ImageSplit subset(const ImageSplit& split, std::span<const std::int64_t> indices);
ImageSplit take_first(const ImageSplit& split, std::int64_t n);

struct TrainValSplit {
    ImageSplit train;
    ImageSplit val;
};

// Validation = the last `val_size` examples of a seeded shuffle of `full`.
TrainValSplit holdout_split(const ImageSplit& full, std::int64_t val_size, std::uint64_t seed);

// byte -> b/255 -> (x - 0.5) / 0.5, planar -> H,W,C. Returns [32,32,3].
Tensor normalize(const RawRecord& record, DType dtype = DType::f32);
double normalize_byte(std::uint8_t b);

std::vector<double> one_hot(int label, int classes = cifar::kClasses);

struct AugmentConfig {
    double flip_prob = 0.5;
    double brightness_max_delta = 0.1;
    bool enabled = true;

    void validate() const;
};

struct AugmentDecision {
    bool flip = false;
    double delta = 0.0;
};

AugmentDecision draw_augmentation(const AugmentConfig& cfg, RngStream& rng);

// In-place on an H,W,C image in the [0,1] domain: optional horizontal
// mirror, one brightness delta for the whole image, clip to [0,1].
void augment(std::span<double> image, std::int64_t height, std::int64_t width, std::int64_t channels,
             const AugmentDecision& decision);

struct PipelineConfig {
    std::int64_t batch_size = 64;
    std::uint64_t shuffle_seed = 42;
    // Batches prepared ahead on a worker thread; 0 = sequential.
    std::int64_t prefetch_depth = 0;
    bool shuffle = true;
    DType dtype = DType::f32;

    void validate() const;
};

struct Batch {
    Tensor images;  // [B,H,W,C] in [-1,1]
    Tensor onehot;  // [B,classes]
    std::vector<int> labels;
    std::vector<std::int64_t> indices;  // positions in the split
};

// Permutation of [0, n) for one epoch, keyed by (seed, epoch).
std::vector<std::int64_t> epoch_permutation(std::int64_t n, std::uint64_t seed, std::int64_t epoch);

// Builds one batch. Augmentation for example i uses the stream keyed by
// (seed, epoch, i), so a batch's content is independent of batch order.
Batch make_batch(const ImageSplit& split, std::span<const std::int64_t> indices, const AugmentConfig& aug,
                 std::uint64_t seed, std::int64_t epoch, DType dtype);

// Ordered batches of one epoch. With prefetch_depth > 0 a worker thread runs
// ahead; the delivered sequence is identical to sequential execution.
class BatchStream {
public:
    BatchStream(const ImageSplit& split, const PipelineConfig& cfg, const AugmentConfig& aug, std::int64_t epoch);
    ~BatchStream();
    BatchStream(const BatchStream&) = delete;
    BatchStream& operator=(const BatchStream&) = delete;

    std::optional<Batch> next();
    std::int64_t num_batches() const noexcept { return num_batches_; }

private:
    Batch build(std::int64_t b) const;
    void worker_loop(std::stop_token stop);

    const ImageSplit& split_;
    PipelineConfig cfg_;
    AugmentConfig aug_;
    std::int64_t epoch_;
    std::vector<std::int64_t> order_;
    std::int64_t num_batches_;
    std::int64_t next_ = 0;

    std::mutex mu_;
    std::condition_variable_any cv_;
    std::deque<Batch> ready_;
    std::int64_t produced_ = 0;
    std::exception_ptr worker_error_;
    std::jthread worker_;
};

struct SyntheticConfig {
    // Distance of each class's regional mean from mid-grey, in byte units.
    double offset = 48.0;
    double noise_std = 32.0;
};

// Class-separable noise images. Class c has a fixed sign pattern over
// (top/bottom half, channel) regions; each region's mean is 128 +/- offset.
// Patterns are flip-invariant so augmentation keeps classes separable.
// Labels are i % classes.
ImageSplit make_synthetic_split(std::int64_t n, int classes, std::int64_t image_size, std::uint64_t seed,
                                const SyntheticConfig& cfg = {});

// Writes a full CIFAR-format directory (5 train files + test) built from a
// synthetic generator; used by loader tests and demos when the real data
// is not available.
void write_synthetic_cifar_dir(const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace rforge
