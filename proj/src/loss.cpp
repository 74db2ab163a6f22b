// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/loss.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace rforge {

CrossEntropyResult softmax_cross_entropy(const Tensor& logits, const Tensor& onehot) {
    if (logits.rank() != 2 || logits.shape() != onehot.shape())
        throw ShapeError("softmax_cross_entropy: logits " + logits.shape().str() + " vs onehot " + onehot.shape().str());
    if (!logits.all_finite()) throw NumericError("softmax_cross_entropy: non-finite logits");
    const std::int64_t n = logits.dim(0), k = logits.dim(1);
    CrossEntropyResult res;
    res.dlogits = Tensor(logits.shape(), logits.dtype());
    std::vector<double> row(static_cast<std::size_t>(k));
    double total = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        double mx = -INFINITY;
        for (std::int64_t j = 0; j < k; ++j) {
            row[j] = logits.at(i * k + j);
            mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::int64_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        for (std::int64_t j = 0; j < k; ++j) {
            const double y = onehot.at(i * k + j);
            total += -y * (row[j] - lse);
            res.dlogits.set(i * k + j, (std::exp(row[j] - lse) - y) / static_cast<double>(n));
        }
    }
    res.loss = total / static_cast<double>(n);
    if (!std::isfinite(res.loss)) throw NumericError("softmax_cross_entropy: non-finite loss");
    return res;
}

namespace ag {

Var softmax_cross_entropy(Tape& t, Var logits, const Tensor& onehot) {
    auto res = rforge::softmax_cross_entropy(t.value(logits), onehot);
    auto dlogits = std::make_shared<Tensor>(std::move(res.dlogits));
    Tensor loss = Tensor::full(Shape{1}, res.loss, t.value(logits).dtype());
    return t.record("softmax_cross_entropy", {logits}, std::move(loss), [dlogits](const Tensor& g) {
        return std::vector<Tensor>{ops::scale(*dlogits, g.at(0))};
    });
}

}  // namespace ag

}  // namespace rforge
