// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace rforge {

// Named stream identifiers. Every consumer of randomness draws from its own
// stream so that, e.g., changing the dropout rate never perturbs the shuffle.
namespace streams {
inline constexpr std::string_view shuffle = "shuffle";
inline constexpr std::string_view split = "split";
inline constexpr std::string_view augment = "augment";
inline constexpr std::string_view dropout = "dropout";
inline constexpr std::string_view init = "init";
inline constexpr std::string_view synthetic = "synthetic";
inline constexpr std::string_view probe = "probe";
}  // namespace streams

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

// Seed derivation: start from the root seed, fold in the FNV-1a hash of the
// stream name, then each key, each fold passing through splitmix64.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::initializer_list<std::uint64_t> keys = {});

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}
    RngStream(std::uint64_t root, std::string_view stream, std::initializer_list<std::uint64_t> keys = {})
        : engine_(derive_seed(root, stream, keys)) {}

    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Box-Muller; does not cache the second variate.
    double normal();
    bool bernoulli(double p) { return uniform() < p; }
    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace rforge
