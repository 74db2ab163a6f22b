// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rforge {

struct EpochRecord {
    std::int64_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double epoch_time_s = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

class History {
public:
    // Epochs must be consecutive from 1 and losses finite.
    void append(const EpochRecord& r);
    const std::vector<EpochRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const EpochRecord& back() const { return records_.back(); }

    // Values printed with %.17g so parsing returns the same doubles.
    std::string to_csv() const;
    static History from_csv(const std::string& text);
    void save(const std::filesystem::path& path) const;
    static History load(const std::filesystem::path& path);

    bool operator==(const History&) const = default;

private:
    std::vector<EpochRecord> records_;
};

inline constexpr const char* kHistoryHeader = "epoch,lr,train_loss,train_acc,val_loss,val_acc,epoch_time_s";

// Shared helpers for the small text files the tools emit.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace rforge
