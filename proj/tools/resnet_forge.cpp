// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "resnet_forge/cli.hpp"

int main(int argc, char** argv) {
    return rforge::run_cli(argc, argv, std::cout, std::cerr);
}
