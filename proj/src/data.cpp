// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace rforge {

namespace fs = std::filesystem;

std::vector<RawRecord> read_cifar_file(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec)) throw IoError("missing CIFAR file: " + path.string());
    const auto size = fs::file_size(path, ec);
    if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
    if (static_cast<std::int64_t>(size) != cifar::kFileBytes)
        throw FormatError(path.string() + ": expected " + std::to_string(cifar::kFileBytes) + " bytes, found " +
                          std::to_string(size));

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<char> buf(static_cast<std::size_t>(cifar::kFileBytes));
    if (!in.read(buf.data(), static_cast<std::streamsize>(buf.size())))
        throw IoError("short read on " + path.string());

    std::vector<RawRecord> records(static_cast<std::size_t>(cifar::kRecordsPerFile));
    for (std::int64_t r = 0; r < cifar::kRecordsPerFile; ++r) {
        const auto* src = reinterpret_cast<const std::uint8_t*>(buf.data()) + r * cifar::kRecordBytes;
        if (src[0] > 9) throw CorruptRecordError(path.string(), static_cast<std::size_t>(r), src[0]);
        auto& rec = records[static_cast<std::size_t>(r)];
        rec.label = src[0];
        std::copy(src + 1, src + cifar::kRecordBytes, rec.pixels.begin());
    }
    return records;
}

void write_cifar_file(const fs::path& path, std::span<const RawRecord> records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& rec : records) {
        out.put(static_cast<char>(rec.label));
        out.write(reinterpret_cast<const char*>(rec.pixels.data()), cifar::kPixels);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

RawDataset load_cifar10(const fs::path& dir) {
    RawDataset ds;
    ds.train.reserve(static_cast<std::size_t>(5 * cifar::kRecordsPerFile));
    for (int i = 1; i <= 5; ++i) {
        auto part = read_cifar_file(dir / ("data_batch_" + std::to_string(i) + ".bin"));
        ds.train.insert(ds.train.end(), part.begin(), part.end());
    }
    ds.test = read_cifar_file(dir / "test_batch.bin");
    return ds;
}

std::span<const std::uint8_t> ImageSplit::image(std::int64_t i) const {
    return std::span<const std::uint8_t>(pixels).subspan(static_cast<std::size_t>(i * image_bytes()),
                                                          static_cast<std::size_t>(image_bytes()));
}

std::vector<std::int64_t> ImageSplit::class_counts() const {
    std::vector<std::int64_t> counts(static_cast<std::size_t>(classes), 0);
    for (auto l : labels) ++counts[l];
    return counts;
}

ImageSplit to_split(std::span<const RawRecord> records) {
    ImageSplit s;
    s.pixels.resize(records.size() * static_cast<std::size_t>(cifar::kPixels));
    s.labels.reserve(records.size());
    constexpr std::int64_t plane = cifar::kSide * cifar::kSide;
    for (std::size_t r = 0; r < records.size(); ++r) {
        std::uint8_t* dst = s.pixels.data() + r * cifar::kPixels;
        for (std::int64_t p = 0; p < plane; ++p)
            for (std::int64_t c = 0; c < cifar::kChannels; ++c)
                dst[p * cifar::kChannels + c] = records[r].pixels[static_cast<std::size_t>(c * plane + p)];
        s.labels.push_back(records[r].label);
    }
    return s;
}

ImageSplit subset(const ImageSplit& split, std::span<const std::int64_t> indices) {
    ImageSplit s;
    s.height = split.height;
    s.width = split.width;
    s.channels = split.channels;
    s.classes = split.classes;
    s.pixels.reserve(indices.size() * static_cast<std::size_t>(split.image_bytes()));
    for (auto i : indices) {
        auto img = split.image(i);
        s.pixels.insert(s.pixels.end(), img.begin(), img.end());
        s.labels.push_back(split.labels[static_cast<std::size_t>(i)]);
    }
    return s;
}

ImageSplit take_first(const ImageSplit& split, std::int64_t n) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(std::min(n, split.size())));
    std::iota(idx.begin(), idx.end(), 0);
    return subset(split, idx);
}

TrainValSplit holdout_split(const ImageSplit& full, std::int64_t val_size, std::uint64_t seed) {
    if (val_size < 0 || val_size >= full.size())
        throw ContractError("holdout_split: validation size must be in [0, " + std::to_string(full.size()) + ")");
    std::vector<std::int64_t> order(static_cast<std::size_t>(full.size()));
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(seed, streams::split);
    for (std::int64_t i = full.size() - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    const auto cut = order.begin() + (full.size() - val_size);
    std::vector<std::int64_t> train_idx(order.begin(), cut), val_idx(cut, order.end());
    return {subset(full, train_idx), subset(full, val_idx)};
}

double normalize_byte(std::uint8_t b) {
    return (static_cast<double>(b) / 255.0 - 0.5) / 0.5;
}

Tensor normalize(const RawRecord& record, DType dtype) {
    Tensor t(Shape{cifar::kSide, cifar::kSide, cifar::kChannels}, dtype);
    constexpr std::int64_t plane = cifar::kSide * cifar::kSide;
    for (std::int64_t p = 0; p < plane; ++p)
        for (std::int64_t c = 0; c < cifar::kChannels; ++c)
            t.set(p * cifar::kChannels + c, normalize_byte(record.pixels[static_cast<std::size_t>(c * plane + p)]));
    return t;
}

std::vector<double> one_hot(int label, int classes) {
    if (classes < 1) throw ContractError("one_hot: classes must be >= 1");
    if (label < 0 || label >= classes)
        throw ContractError("one_hot: label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
    std::vector<double> v(static_cast<std::size_t>(classes), 0.0);
    v[static_cast<std::size_t>(label)] = 1.0;
    return v;
}

void AugmentConfig::validate() const {
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ContractError("flip_prob must be in [0, 1]");
    if (!(brightness_max_delta >= 0.0)) throw ContractError("brightness_max_delta must be >= 0");
}

AugmentDecision draw_augmentation(const AugmentConfig& cfg, RngStream& rng) {
    AugmentDecision d;
    d.flip = rng.bernoulli(cfg.flip_prob);
    d.delta = rng.uniform(-cfg.brightness_max_delta, cfg.brightness_max_delta);
    return d;
}

void augment(std::span<double> image, std::int64_t height, std::int64_t width, std::int64_t channels,
             const AugmentDecision& decision) {
    if (static_cast<std::int64_t>(image.size()) != height * width * channels)
        throw ShapeError("augment: image size does not match geometry");
    if (decision.flip) {
        for (std::int64_t y = 0; y < height; ++y)
            for (std::int64_t x = 0; x < width / 2; ++x)
                for (std::int64_t c = 0; c < channels; ++c)
                    std::swap(image[static_cast<std::size_t>((y * width + x) * channels + c)],
                              image[static_cast<std::size_t>((y * width + (width - 1 - x)) * channels + c)]);
    }
    for (auto& v : image) v = std::clamp(v + decision.delta, 0.0, 1.0);
}

void PipelineConfig::validate() const {
    if (batch_size < 1) throw ContractError("batch_size must be >= 1");
    if (prefetch_depth < 0) throw ContractError("prefetch_depth must be >= 0");
}

std::vector<std::int64_t> epoch_permutation(std::int64_t n, std::uint64_t seed, std::int64_t epoch) {
    std::vector<std::int64_t> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), 0);
    RngStream rng(seed, streams::shuffle, {static_cast<std::uint64_t>(epoch)});
    for (std::int64_t i = n - 1; i > 0; --i)
        std::swap(p[i], p[static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    return p;
}

Batch make_batch(const ImageSplit& split, std::span<const std::int64_t> indices, const AugmentConfig& aug,
                 std::uint64_t seed, std::int64_t epoch, DType dtype) {
    const auto b = static_cast<std::int64_t>(indices.size());
    const std::int64_t px = split.image_bytes();
    Batch batch;
    batch.images = Tensor(Shape{b, split.height, split.width, split.channels}, dtype);
    batch.onehot = Tensor(Shape{b, split.classes}, dtype);
    batch.indices.assign(indices.begin(), indices.end());
    std::vector<double> img(static_cast<std::size_t>(px));
    dispatch(dtype, [&]<typename T>() {
        auto out = batch.images.data<T>();
        auto oh = batch.onehot.data<T>();
        for (std::int64_t k = 0; k < b; ++k) {
            const std::int64_t i = indices[static_cast<std::size_t>(k)];
            const int label = split.labels[static_cast<std::size_t>(i)];
            batch.labels.push_back(label);
            oh[static_cast<std::size_t>(k * split.classes + label)] = T(1);
            auto bytes = split.image(i);
            T* dst = out.data() + k * px;
            if (!aug.enabled) {
                for (std::int64_t p = 0; p < px; ++p) dst[p] = static_cast<T>(normalize_byte(bytes[static_cast<std::size_t>(p)]));
                continue;
            }
            for (std::int64_t p = 0; p < px; ++p) img[static_cast<std::size_t>(p)] = static_cast<double>(bytes[static_cast<std::size_t>(p)]) / 255.0;
            RngStream rng(seed, streams::augment, {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(i)});
            augment(img, split.height, split.width, split.channels, draw_augmentation(aug, rng));
            for (std::int64_t p = 0; p < px; ++p) dst[p] = static_cast<T>((img[static_cast<std::size_t>(p)] - 0.5) / 0.5);
        }
    });
    return batch;
}

BatchStream::BatchStream(const ImageSplit& split, const PipelineConfig& cfg, const AugmentConfig& aug,
                         std::int64_t epoch)
    : split_(split), cfg_(cfg), aug_(aug), epoch_(epoch) {
    cfg_.validate();
    aug_.validate();
    if (split.size() == 0) throw ContractError("BatchStream: split is empty");
    if (cfg_.shuffle) {
        order_ = epoch_permutation(split.size(), cfg_.shuffle_seed, epoch);
    } else {
        order_.resize(static_cast<std::size_t>(split.size()));
        std::iota(order_.begin(), order_.end(), 0);
    }
    num_batches_ = (split.size() + cfg_.batch_size - 1) / cfg_.batch_size;
    if (cfg_.prefetch_depth > 0) worker_ = std::jthread([this](std::stop_token st) { worker_loop(st); });
}

BatchStream::~BatchStream() {
    if (worker_.joinable()) {
        worker_.request_stop();
        cv_.notify_all();
    }
}

Batch BatchStream::build(std::int64_t b) const {
    const std::int64_t begin = b * cfg_.batch_size;
    const std::int64_t end = std::min(begin + cfg_.batch_size, split_.size());
    return make_batch(split_, std::span<const std::int64_t>(order_).subspan(static_cast<std::size_t>(begin),
                                                                           static_cast<std::size_t>(end - begin)),
                      aug_, cfg_.shuffle_seed, epoch_, cfg_.dtype);
}

void BatchStream::worker_loop(std::stop_token stop) {
    try {
        for (std::int64_t b = 0; b < num_batches_; ++b) {
            {
                std::unique_lock lock(mu_);
                cv_.wait(lock, stop, [&] { return static_cast<std::int64_t>(ready_.size()) < cfg_.prefetch_depth; });
                if (stop.stop_requested()) return;
            }
            Batch batch = build(b);
            {
                std::lock_guard lock(mu_);
                ready_.push_back(std::move(batch));
                ++produced_;
            }
            cv_.notify_all();
        }
    } catch (...) {
        std::lock_guard lock(mu_);
        worker_error_ = std::current_exception();
        produced_ = num_batches_;
        cv_.notify_all();
    }
}

std::optional<Batch> BatchStream::next() {
    if (next_ >= num_batches_) return std::nullopt;
    if (cfg_.prefetch_depth == 0) return build(next_++);

    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !ready_.empty() || worker_error_; });
    if (worker_error_) std::rethrow_exception(worker_error_);
    Batch b = std::move(ready_.front());
    ready_.pop_front();
    ++next_;
    lock.unlock();
    cv_.notify_all();
    return b;
}

ImageSplit make_synthetic_split(std::int64_t n, int classes, std::int64_t image_size, std::uint64_t seed,
                                const SyntheticConfig& cfg) {
    if (n < 1 || classes < 2 || image_size < 2) throw ContractError("make_synthetic_split: bad geometry");
    constexpr int regions = 2 * 3;  // top/bottom x channel
    if (classes > (1 << regions)) throw ContractError("make_synthetic_split: too many classes");

    // Distinct sign patterns, one per class, from the synthetic stream.
    RngStream pattern_rng(seed, streams::synthetic, {0});
    std::vector<int> codes;
    while (static_cast<int>(codes.size()) < classes) {
        const int code = static_cast<int>(pattern_rng.below(1u << regions));
        if (std::find(codes.begin(), codes.end(), code) == codes.end()) codes.push_back(code);
    }

    ImageSplit s;
    s.height = s.width = image_size;
    s.channels = 3;
    s.classes = classes;
    s.pixels.resize(static_cast<std::size_t>(n * image_size * image_size * 3));
    s.labels.resize(static_cast<std::size_t>(n));
    RngStream noise(seed, streams::synthetic, {1});
    for (std::int64_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % classes);
        s.labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(label);
        std::uint8_t* img = s.pixels.data() + i * image_size * image_size * 3;
        for (std::int64_t y = 0; y < image_size; ++y)
            for (std::int64_t x = 0; x < image_size; ++x)
                for (int c = 0; c < 3; ++c) {
                    const int region = (y < image_size / 2 ? 0 : 3) + c;
                    const double sign = (codes[static_cast<std::size_t>(label)] >> region) & 1 ? 1.0 : -1.0;
                    const double v = 128.0 + sign * cfg.offset + cfg.noise_std * noise.normal();
                    img[(y * image_size + x) * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
                }
    }
    return s;
}

void write_synthetic_cifar_dir(const fs::path& dir, std::uint64_t seed) {
    fs::create_directories(dir);
    auto write_part = [&](const std::string& name, std::uint64_t part) {
        ImageSplit s = make_synthetic_split(cifar::kRecordsPerFile, cifar::kClasses, cifar::kSide, seed + part);
        std::vector<RawRecord> recs(static_cast<std::size_t>(cifar::kRecordsPerFile));
        constexpr std::int64_t plane = cifar::kSide * cifar::kSide;
        for (std::int64_t r = 0; r < cifar::kRecordsPerFile; ++r) {
            auto& rec = recs[static_cast<std::size_t>(r)];
            rec.label = s.labels[static_cast<std::size_t>(r)];
            auto img = s.image(r);
            for (std::int64_t p = 0; p < plane; ++p)
                for (std::int64_t c = 0; c < 3; ++c)
                    rec.pixels[static_cast<std::size_t>(c * plane + p)] = img[static_cast<std::size_t>(p * 3 + c)];
        }
        write_cifar_file(dir / name, recs);
    };
    for (int i = 1; i <= 5; ++i) write_part("data_batch_" + std::to_string(i) + ".bin", static_cast<std::uint64_t>(i));
    write_part("test_batch.bin", 0);
}

}  // namespace rforge
