// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "resnet_forge/optim.hpp"
#include "resnet_forge/tensor.hpp"

namespace rforge {

class Model;

struct NamedTensor {
    std::string name;
    Tensor value;
};

struct Checkpoint {
    std::vector<NamedTensor> tensors;  // model parameters first, optional optimizer state after
    std::string model;                 // build_model() name
    std::uint32_t epoch = 0;
    double val_loss = 0.0;
    std::uint64_t seed = 0;

    const Tensor* find(const std::string& name) const;
};

// Layout (little-endian):
//   "RNCK" u32 version=1 u32 count
//   count x { u16 name_len, name, u8 dtype, u8 rank, u32 dims[rank], raw values }
//   u16 model_len, model, u32 epoch, f64 val_loss, u64 seed
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
// Throws FormatError on bad magic, unknown version, truncation or trailing bytes.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// IoError when the file cannot be opened.
Checkpoint load_checkpoint(const std::filesystem::path& path);

inline constexpr std::string_view kOptimizerPrefix = "opt.";

// One tensor per model parameter (running statistics included); optimizer
// moments are appended as "opt.m/<name>", "opt.v/<name>" and "opt.t" when
// `optimizer` is given.
Checkpoint make_checkpoint(const Model& model, std::uint32_t epoch, double val_loss, std::uint64_t seed,
                           const AdamState* optimizer = nullptr);
// Copies every parameter tensor back; shapes and dtypes must match.
void apply_checkpoint(const Checkpoint& ckpt, Model& model, AdamState* optimizer = nullptr);
// Rebuilds the model named in the checkpoint and loads its weights.
Model model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace rforge
