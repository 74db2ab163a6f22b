// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "resnet_forge/loss.hpp"

namespace rforge {

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
    if (classes < 1) throw ContractError("ConfusionMatrix: classes must be >= 1");
    counts_.assign(static_cast<std::size_t>(classes * classes), 0);
}

void ConfusionMatrix::add(int truth, int predicted, std::int64_t count) {
    if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_)
        throw ContractError("ConfusionMatrix: class index out of range");
    if (count < 0) throw ContractError("ConfusionMatrix: negative count");
    counts_[static_cast<std::size_t>(truth * classes_ + predicted)] += count;
}

std::int64_t ConfusionMatrix::at(int truth, int predicted) const {
    return counts_.at(static_cast<std::size_t>(truth * classes_ + predicted));
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
}

std::int64_t ConfusionMatrix::row_sum(int truth) const {
    std::int64_t s = 0;
    for (int p = 0; p < classes_; ++p) s += at(truth, p);
    return s;
}

std::int64_t ConfusionMatrix::col_sum(int predicted) const {
    std::int64_t s = 0;
    for (int t = 0; t < classes_; ++t) s += at(t, predicted);
    return s;
}

std::string ConfusionMatrix::to_csv() const {
    std::ostringstream os;
    for (int t = 0; t < classes_; ++t) {
        for (int p = 0; p < classes_; ++p) os << (p ? "," : "") << at(t, p);
        os << '\n';
    }
    return os.str();
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
    ConfusionMatrix cm(static_cast<int>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != rows.size()) throw ShapeError("ConfusionMatrix: rows must form a square matrix");
        for (std::size_t p = 0; p < rows.size(); ++p) cm.add(static_cast<int>(t), static_cast<int>(p), rows[t][p]);
    }
    return cm;
}

namespace {

double safe_div(double a, double b) {
    return b == 0.0 ? 0.0 : a / b;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

ClassificationReport classification_report(const ConfusionMatrix& cm) {
    ClassificationReport r;
    const int k = cm.classes();
    for (int c = 0; c < k; ++c) {
        ClassMetrics m;
        const double tp = static_cast<double>(cm.at(c, c));
        m.precision = safe_div(tp, static_cast<double>(cm.col_sum(c)));
        m.recall = safe_div(tp, static_cast<double>(cm.row_sum(c)));
        m.f1 = safe_div(2.0 * m.precision * m.recall, m.precision + m.recall);
        m.support = cm.row_sum(c);
        r.macro.precision += m.precision / k;
        r.macro.recall += m.recall / k;
        r.macro.f1 += m.f1 / k;
        r.macro.support += m.support;
        r.per_class.push_back(m);
    }
    return r;
}

std::string ClassificationReport::to_csv() const {
    std::ostringstream os;
    os << "class,precision,recall,f1,support\n";
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        const auto& m = per_class[c];
        os << c << ',' << fmt(m.precision) << ',' << fmt(m.recall) << ',' << fmt(m.f1) << ',' << m.support << '\n';
    }
    os << "macro_avg," << fmt(macro.precision) << ',' << fmt(macro.recall) << ',' << fmt(macro.f1) << ','
       << macro.support << '\n';
    return os.str();
}

int argmax(std::span<const double> row) {
    int best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] > row[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
    return best;
}

EvalResult evaluate(const LogitsFn& logits_fn, const ImageSplit& split, std::int64_t batch_size, DType dtype) {
    if (split.size() == 0) throw ContractError("evaluate: empty split");
    PipelineConfig cfg;
    cfg.batch_size = batch_size;
    cfg.shuffle = false;
    cfg.dtype = dtype;
    AugmentConfig aug;
    aug.enabled = false;
    BatchStream stream(split, cfg, aug, 0);

    EvalResult res{0.0, 0.0, ConfusionMatrix(split.classes)};
    double loss_sum = 0.0;
    std::int64_t correct = 0;
    while (auto batch = stream.next()) {
        const Tensor logits = logits_fn(batch->images);
        const auto b = static_cast<std::int64_t>(batch->labels.size());
        if (logits.rank() != 2 || logits.dim(0) != b || logits.dim(1) != split.classes)
            throw ShapeError("evaluate: logits shape " + logits.shape().str());
        loss_sum += softmax_cross_entropy(logits, batch->onehot.to(logits.dtype())).loss * static_cast<double>(b);
        const auto values = logits.to_vector();
        for (std::int64_t i = 0; i < b; ++i) {
            const int pred = argmax(std::span<const double>(values).subspan(static_cast<std::size_t>(i * split.classes),
                                                                            static_cast<std::size_t>(split.classes)));
            const int truth = batch->labels[static_cast<std::size_t>(i)];
            res.confusion.add(truth, pred);
            correct += pred == truth;
        }
    }
    res.loss = loss_sum / static_cast<double>(split.size());
    res.accuracy = static_cast<double>(correct) / static_cast<double>(split.size());
    return res;
}

EvalResult evaluate(Model& model, const ImageSplit& split, std::int64_t batch_size) {
    return evaluate([&](const Tensor& images) { return model.predict(images); }, split, batch_size, model.dtype());
}

}  // namespace rforge
