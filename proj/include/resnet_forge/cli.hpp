// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>

namespace rforge {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime, I/O or numeric failure
inline constexpr int kExitUsage = 2;    // bad flags, config or model name

// The resnet_forge command line: train, eval, gradflow, ablate, summary,
// selftest. Normal output goes to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rforge
