// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "resnet_forge/data.hpp"
#include "resnet_forge/models.hpp"

namespace rforge {

// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int classes = cifar::kClasses);

    void add(int truth, int predicted, std::int64_t count = 1);
    std::int64_t at(int truth, int predicted) const;
    int classes() const noexcept { return classes_; }
    std::int64_t total() const;
    std::int64_t row_sum(int truth) const;
    std::int64_t col_sum(int predicted) const;

    // `classes` lines of comma-separated counts, no header.
    std::string to_csv() const;
    static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows);

private:
    int classes_;
    std::vector<std::int64_t> counts_;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
};

struct ClassificationReport {
    std::vector<ClassMetrics> per_class;
    ClassMetrics macro;

    // Header class,precision,recall,f1,support; one row per class then macro_avg.
    std::string to_csv() const;
};

// precision = diag / column sum, recall = diag / row sum, F1 their harmonic
// mean; every 0/0 is 0.
ClassificationReport classification_report(const ConfusionMatrix& cm);

// Index of the largest value in a row; ties go to the lowest index.
int argmax(std::span<const double> row);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    ConfusionMatrix confusion;
};

using LogitsFn = std::function<Tensor(const Tensor& images)>;

// Mean cross-entropy, top-1 accuracy and confusion matrix over a split, in
// unshuffled batches without augmentation.
EvalResult evaluate(const LogitsFn& logits, const ImageSplit& split, std::int64_t batch_size = 64,
                    DType dtype = DType::f32);
// Eval mode: running BN statistics, dropout off.
EvalResult evaluate(Model& model, const ImageSplit& split, std::int64_t batch_size = 64);

}  // namespace rforge
