// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "resnet_forge/loss.hpp"

namespace rforge {

void TrainConfig::validate() const {
    if (epochs < 1) throw ContractError("train: epochs must be >= 1");
    if (batch_size < 1) throw ContractError("train: batch_size must be >= 1");
    if (prefetch_depth < 0) throw ContractError("train: prefetch_depth must be >= 0");
    adam.validate();
    augment.validate();
}

namespace {

struct StepOutcome {
    double loss = 0.0;
    std::int64_t correct = 0;
};

StepOutcome train_step(Model& model, const Batch& batch, AdamState& state, const AdamHyper& adam, double lr,
                       std::uint64_t seed, std::int64_t step) {
    Tape tape;
    ForwardContext ctx(tape, model.parameters(), LayerMode::train);
    RngStream drop(seed, streams::dropout, {static_cast<std::uint64_t>(step)});
    ctx.dropout_rng = &drop;
    const Var x = tape.input(batch.images);
    const Var logits = model.forward(ctx, x);
    const Var loss = ag::softmax_cross_entropy(tape, logits, batch.onehot);

    StepOutcome out;
    out.loss = tape.value(loss).at(0);
    const auto values = tape.value(logits).to_vector();
    const auto k = static_cast<std::size_t>(tape.value(logits).dim(1));
    for (std::size_t i = 0; i < batch.labels.size(); ++i)
        out.correct += argmax(std::span<const double>(values).subspan(i * k, k)) == batch.labels[i];

    const GradientMap grads = tape.backward(loss);
    adam_step(model.parameters(), grads, state, adam, lr);
    return out;
}

}  // namespace

TrainResult train_model(Model& model, const ImageSplit& train, const ImageSplit& val, const TrainConfig& cfg) {
    cfg.validate();
    if (train.size() == 0 || val.size() == 0) throw ContractError("train: empty train or validation split");
    if (train.classes != model.spec().num_classes)
        throw ContractError("train: split has " + std::to_string(train.classes) + " classes, model " +
                            std::to_string(model.spec().num_classes));
    if (cfg.out_dir) std::filesystem::create_directories(*cfg.out_dir);

    PipelineConfig pcfg;
    pcfg.batch_size = cfg.batch_size;
    pcfg.shuffle_seed = cfg.seed;
    pcfg.prefetch_depth = cfg.prefetch_depth;
    pcfg.dtype = model.dtype();

    AdamState state;
    PlateauScheduler plateau(cfg.adam.lr0, cfg.plateau);
    EarlyStopping stopper(cfg.early_stop);
    TrainResult res;
    std::int64_t step = 0;

    for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = plateau.lr();
        double loss_sum = 0.0;
        std::int64_t correct = 0;
        try {
            BatchStream stream(train, pcfg, cfg.augment, epoch);
            while (auto batch = stream.next()) {
                const auto out = train_step(model, *batch, state, cfg.adam, lr, cfg.seed, step++);
                if (!std::isfinite(out.loss)) throw NumericError("non-finite training loss");
                res.step_losses.push_back(out.loss);
                loss_sum += out.loss * static_cast<double>(batch->labels.size());
                correct += out.correct;
            }
        } catch (const NumericError& e) {
            res.diverged = true;
            res.error = "diverged in epoch " + std::to_string(epoch) + ": " + e.what();
            break;
        }
        EvalResult ev;
        try {
            ev = evaluate(model, val, cfg.batch_size);
        } catch (const NumericError& e) {
            res.diverged = true;
            res.error = "diverged in epoch " + std::to_string(epoch) + " (validation): " + e.what();
            break;
        }
        const auto n = static_cast<double>(train.size());
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        EpochRecord rec{epoch, lr, loss_sum / n, static_cast<double>(correct) / n, ev.loss, ev.accuracy,
                        cfg.deterministic ? 0.0 : secs};
        res.history.append(rec);

        plateau.update(ev.loss);
        const std::int64_t best_before = stopper.best_epoch();
        const StopDecision decision = stopper.update(ev.loss, model.parameters());
        if (stopper.best_epoch() != best_before) {
            res.best = make_checkpoint(model, static_cast<std::uint32_t>(epoch), ev.loss, cfg.seed);
            if (cfg.out_dir) save_checkpoint(*res.best, *cfg.out_dir / "best.ckpt");
        }
        if (cfg.out_dir) res.history.save(*cfg.out_dir / "history.csv");
        if (cfg.on_epoch) cfg.on_epoch(rec);
        if (decision == StopDecision::stop) {
            res.early_stopped = true;
            break;
        }
    }
    if (cfg.out_dir) res.history.save(*cfg.out_dir / "history.csv");
    return res;
}

std::string GradFlowRecord::to_csv() const {
    std::ostringstream os;
    os << "layer,depth,grad_l2\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.grad_l2);
        os << r.layer << ',' << r.depth << ',' << buf << '\n';
    }
    return os.str();
}

double GradFlowRecord::vanishing_ratio() const {
    if (rows.empty()) throw ContractError("GradFlowRecord: no rows");
    if (rows.back().grad_l2 == 0.0) return std::numeric_limits<double>::infinity();
    return rows.front().grad_l2 / rows.back().grad_l2;
}

GradFlowRecord gradient_flow_probe(Model& model, const Tensor& images, const Tensor& onehot) {
    Tape tape;
    ForwardContext ctx(tape, model.parameters(), LayerMode::train);
    ctx.dropout_enabled = false;
    ctx.update_running_stats = false;
    const Var x = tape.input(images.dtype() == model.dtype() ? images : images.to(model.dtype()));
    const Var logits = model.forward(ctx, x);
    const Var loss = ag::softmax_cross_entropy(tape, logits, onehot.to(model.dtype()));
    const GradientMap grads = tape.backward(loss);

    GradFlowRecord rec;
    std::int64_t depth = 0;
    for (const auto& layer : model.parameter_layers()) {
        double sq = 0.0;
        for (const auto& name : layer.params) {
            const auto it = grads.find(name);
            if (it == grads.end()) continue;
            for (double g : it->second.to_vector()) sq += g * g;
        }
        rec.rows.push_back({layer.name, depth++, std::sqrt(sq)});
    }
    return rec;
}

Batch make_probe_batch(const ImageSplit& split, std::int64_t batch, std::uint64_t seed, DType dtype) {
    if (batch < 1 || batch > split.size()) throw ContractError("probe batch size must be in [1, split size]");
    std::vector<std::int64_t> idx(static_cast<std::size_t>(split.size()));
    std::iota(idx.begin(), idx.end(), 0);
    RngStream rng(seed, streams::probe);
    for (std::int64_t i = 0; i < batch; ++i) {
        const auto j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(split.size() - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(batch));
    AugmentConfig off;
    off.enabled = false;
    return make_batch(split, idx, off, seed, 0, dtype);
}

}  // namespace rforge
