// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "resnet_forge/autograd.hpp"

namespace rforge {

struct CrossEntropyResult {
    double loss = 0.0;
    Tensor dlogits;  // (softmax - onehot) / N
};

// Mean categorical cross-entropy over the batch, via max-shifted log-sum-exp.
CrossEntropyResult softmax_cross_entropy(const Tensor& logits, const Tensor& onehot);

namespace ag {
Var softmax_cross_entropy(Tape& t, Var logits, const Tensor& onehot);
}

}  // namespace rforge
