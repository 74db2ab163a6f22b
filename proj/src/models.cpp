// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/models.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

namespace rforge {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

ModelSpec residual_model(std::string name, std::int64_t stem_filters, const std::array<std::int64_t, 4>& filters,
                         bool downsample_first_stage, bool skip, std::int64_t num_classes) {
    ModelSpec spec;
    spec.name = std::move(name);
    spec.num_classes = num_classes;
    spec.skip_connections = skip;
    spec.layers.push_back(ConvSpec{"stem.conv", 3, 3, stem_filters, 1});
    spec.layers.push_back(BatchNormSpec{"stem.bn", stem_filters});
    spec.layers.push_back(ReluSpec{"stem.relu"});
    std::int64_t in = stem_filters;
    for (std::size_t s = 0; s < filters.size(); ++s) {
        const std::int64_t out = filters[s];
        for (int b = 0; b < 2; ++b) {
            ResidualBlockSpec block;
            block.in_channels = b == 0 ? in : out;
            block.out_channels = out;
            const bool downsample = b == 0 && (s > 0 || downsample_first_stage);
            block.stride = downsample ? 2 : 1;
            if (!skip)
                block.shortcut = Shortcut::none;
            else if (block.stride != 1 || block.in_channels != block.out_channels)
                block.shortcut = Shortcut::projection;
            else
                block.shortcut = Shortcut::identity;
            spec.layers.push_back(
                ResidualBlockLayer{"stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1), block});
        }
        in = out;
    }
    spec.layers.push_back(GlobalAvgPoolSpec{"gap"});
    spec.layers.push_back(DropoutSpec{"dropout", spec.dropout_p});
    spec.layers.push_back(DenseSpec{"head.dense", in, num_classes});
    return spec;
}

// One primitive layer after residual-block expansion.
struct FlatLayer {
    std::string name;
    enum Kind { conv, bn, relu, maxpool, gap, dropout, dense, add } kind;
    std::int64_t kernel = 0, in = 0, out = 0, stride = 1;
};

std::vector<FlatLayer> flatten(const ModelSpec& spec) {
    std::vector<FlatLayer> flat;
    for (const auto& layer : spec.layers) {
        std::visit(overloaded{
                       [&](const ConvSpec& c) {
                           flat.push_back({c.name, FlatLayer::conv, c.kernel, c.in, c.out, c.stride});
                       },
                       [&](const BatchNormSpec& b) { flat.push_back({b.name, FlatLayer::bn, 0, b.channels, b.channels}); },
                       [&](const ReluSpec& r) { flat.push_back({r.name, FlatLayer::relu}); },
                       [&](const MaxPoolSpec& m) { flat.push_back({m.name, FlatLayer::maxpool, m.window, 0, 0, m.stride}); },
                       [&](const GlobalAvgPoolSpec& g) { flat.push_back({g.name, FlatLayer::gap}); },
                       [&](const DropoutSpec& d) { flat.push_back({d.name, FlatLayer::dropout}); },
                       [&](const DenseSpec& d) { flat.push_back({d.name, FlatLayer::dense, 0, d.in, d.out}); },
                       [&](const ResidualBlockLayer& r) {
                           const auto& b = r.block;
                           b.validate();
                           const auto& p = r.name;
                           flat.push_back({p + ".conv1", FlatLayer::conv, 3, b.in_channels, b.out_channels, b.stride});
                           flat.push_back({p + ".bn1", FlatLayer::bn, 0, b.out_channels, b.out_channels});
                           flat.push_back({p + ".relu1", FlatLayer::relu});
                           flat.push_back({p + ".conv2", FlatLayer::conv, 3, b.out_channels, b.out_channels, 1});
                           flat.push_back({p + ".bn2", FlatLayer::bn, 0, b.out_channels, b.out_channels});
                           if (b.shortcut == Shortcut::projection) {
                               flat.push_back(
                                   {p + ".shortcut.conv", FlatLayer::conv, 1, b.in_channels, b.out_channels, b.stride});
                               flat.push_back({p + ".shortcut.bn", FlatLayer::bn, 0, b.out_channels, b.out_channels});
                           }
                           if (b.shortcut != Shortcut::none) flat.push_back({p + ".add", FlatLayer::add});
                           flat.push_back({p + ".relu2", FlatLayer::relu});
                       },
                   },
                   layer);
    }
    return flat;
}

}  // namespace

const std::string& layer_name(const LayerSpec& layer) {
    return std::visit([](const auto& l) -> const std::string& { return l.name; }, layer);
}

ModelSpec build_baseline_cnn(std::int64_t num_classes) {
    ModelSpec spec;
    spec.name = "baseline";
    spec.num_classes = num_classes;
    spec.skip_connections = false;
    std::int64_t in = 3;
    int i = 1;
    for (std::int64_t out : {32, 64, 128, 256}) {
        const std::string p = "block" + std::to_string(i++);
        spec.layers.push_back(ConvSpec{p + ".conv", 3, in, out, 1});
        spec.layers.push_back(BatchNormSpec{p + ".bn", out});
        spec.layers.push_back(ReluSpec{p + ".relu"});
        spec.layers.push_back(MaxPoolSpec{p + ".pool", 2, 2});
        in = out;
    }
    spec.layers.push_back(GlobalAvgPoolSpec{"gap"});
    spec.layers.push_back(DropoutSpec{"dropout", spec.dropout_p});
    spec.layers.push_back(DenseSpec{"head.dense", in, num_classes});
    return spec;
}

ModelSpec build_mini_resnet(std::int64_t num_classes) {
    return residual_model("mini_resnet", 32, {32, 64, 128, 256}, true, true, num_classes);
}

ModelSpec build_resnet18(bool skip, std::int64_t num_classes) {
    return residual_model(skip ? "resnet18" : "resnet18_noskip", 64, {64, 128, 256, 512}, false, skip, num_classes);
}

ModelSpec build_model(const std::string& name, std::int64_t num_classes) {
    if (name == "baseline") return build_baseline_cnn(num_classes);
    if (name == "mini_resnet") return build_mini_resnet(num_classes);
    if (name == "resnet18") return build_resnet18(true, num_classes);
    if (name == "resnet18_noskip") return build_resnet18(false, num_classes);
    throw ContractError("unknown model '" + name + "' (expected baseline, mini_resnet, resnet18, resnet18_noskip)");
}

ModelSummary model_summary(const ModelSpec& spec) {
    ModelSummary summary;
    summary.model = spec.name;
    std::int64_t h = spec.input[0], w = spec.input[1], c = spec.input[2];
    std::int64_t features = 0;  // > 0 once flattened by global pooling
    std::int64_t block_h = 0, block_w = 0, block_c = 0;

    for (const auto& l : flatten(spec)) {
        SummaryRow row;
        row.layer = l.name;
        switch (l.kind) {
            case FlatLayer::conv: {
                // A block's first conv and its projection both read the block
                // input; remember its extent.
                if (l.name.ends_with(".conv1")) {
                    block_h = h;
                    block_w = w;
                    block_c = c;
                }
                if (l.name.ends_with(".shortcut.conv")) {
                    h = block_h;
                    w = block_w;
                    c = block_c;
                }
                if (features || l.in != c)
                    throw SpecError(l.name + ": expects " + std::to_string(l.in) + " channels, gets " + std::to_string(c));
                h = conv_axis(h, l.kernel, l.stride, Padding::same).out;
                w = conv_axis(w, l.kernel, l.stride, Padding::same).out;
                c = l.out;
                row.trainable = l.kernel * l.kernel * l.in * l.out + l.out;
                row.tensors = 2;
                break;
            }
            case FlatLayer::bn:
                if (l.in != (features ? features : c)) throw SpecError(l.name + ": channel mismatch");
                row.trainable = 2 * l.in;
                row.non_trainable = 2 * l.in;
                row.tensors = 4;
                break;
            case FlatLayer::maxpool:
                if (l.kernel > h || l.kernel > w) throw SpecError(l.name + ": window larger than input");
                h = (h - l.kernel) / l.stride + 1;
                w = (w - l.kernel) / l.stride + 1;
                break;
            case FlatLayer::gap:
                features = c;
                break;
            case FlatLayer::dense:
                if (!features || l.in != features)
                    throw SpecError(l.name + ": expects " + std::to_string(l.in) + " features");
                features = l.out;
                row.trainable = l.in * l.out + l.out;
                row.tensors = 2;
                break;
            case FlatLayer::relu:
            case FlatLayer::dropout:
            case FlatLayer::add:
                break;
        }
        row.output_shape = features ? std::vector<std::int64_t>{features} : std::vector<std::int64_t>{h, w, c};
        summary.total_trainable += row.trainable;
        summary.total_non_trainable += row.non_trainable;
        summary.rows.push_back(std::move(row));
    }
    return summary;
}

ParamCount count_parameters(const ModelSpec& spec) {
    // Independent of model_summary: walks the declarative spec directly.
    ParamCount pc;
    auto conv = [&](std::int64_t k, std::int64_t in, std::int64_t out) { pc.trainable += k * k * in * out + out; };
    auto bn = [&](std::int64_t ch) {
        pc.trainable += 2 * ch;
        pc.non_trainable += 2 * ch;
    };
    for (const auto& layer : spec.layers) {
        std::visit(overloaded{
                       [&](const ConvSpec& c) { conv(c.kernel, c.in, c.out); },
                       [&](const BatchNormSpec& b) { bn(b.channels); },
                       [&](const DenseSpec& d) { pc.trainable += d.in * d.out + d.out; },
                       [&](const ResidualBlockLayer& r) {
                           conv(3, r.block.in_channels, r.block.out_channels);
                           bn(r.block.out_channels);
                           conv(3, r.block.out_channels, r.block.out_channels);
                           bn(r.block.out_channels);
                           if (r.block.shortcut == Shortcut::projection) {
                               conv(1, r.block.in_channels, r.block.out_channels);
                               bn(r.block.out_channels);
                           }
                       },
                       [](const auto&) {},
                   },
                   layer);
    }
    return pc;
}

namespace {

std::string shape_str(const std::vector<std::int64_t>& dims) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "x" : "") + std::to_string(dims[i]);
    return s;
}

}  // namespace

std::string ModelSummary::to_text() const {
    std::ostringstream os;
    os << "Model: " << model << '\n';
    os << std::left << std::setw(32) << "Layer" << std::setw(16) << "Output shape" << std::right << std::setw(14)
       << "Trainable" << std::setw(16) << "Non-trainable" << '\n';
    os << std::string(78, '-') << '\n';
    for (const auto& r : rows)
        os << std::left << std::setw(32) << r.layer << std::setw(16) << shape_str(r.output_shape) << std::right
           << std::setw(14) << r.trainable << std::setw(16) << r.non_trainable << '\n';
    os << std::string(78, '-') << '\n';
    os << "Trainable params: " << total_trainable << " (" << format_param_count(total_trainable) << ")\n";
    os << "Non-trainable params: " << total_non_trainable << '\n';
    os << "Total params: " << total_trainable + total_non_trainable << '\n';
    return os.str();
}

std::string ModelSummary::to_csv() const {
    std::ostringstream os;
    os << "layer,output_shape,trainable,non_trainable\n";
    for (const auto& r : rows)
        os << r.layer << ',' << shape_str(r.output_shape) << ',' << r.trainable << ',' << r.non_trainable << '\n';
    return os.str();
}

Model::Model(ModelSpec spec, DType dtype, std::uint64_t seed) : spec_(std::move(spec)), dtype_(dtype) {
    model_summary(spec_);  // validates shape chaining
    for (const auto& layer : spec_.layers) {
        std::visit(overloaded{
                       [&](const ConvSpec& c) { layers::add_conv_params(params_, c.name, c.kernel, c.in, c.out, dtype, seed); },
                       [&](const BatchNormSpec& b) { layers::add_batchnorm_params(params_, b.name, b.channels, dtype); },
                       [&](const DenseSpec& d) { layers::add_dense_params(params_, d.name, d.in, d.out, dtype, seed); },
                       [&](const ResidualBlockLayer& r) {
                           layers::add_residual_block_params(params_, r.name, r.block, dtype, seed);
                       },
                       [](const auto&) {},
                   },
                   layer);
    }
}

Var Model::forward(ForwardContext& ctx, Var x) {
    const Tensor& in = ctx.tape.value(x);
    if (in.rank() != 4 || in.dim(3) != spec_.input[2])
        throw ShapeError(spec_.name + ": expected [N,H,W," + std::to_string(spec_.input[2]) + "] input, got " +
                         in.shape().str());
    for (const auto& layer : spec_.layers) {
        x = std::visit(overloaded{
                           [&](const ConvSpec& c) { return layers::conv(ctx, x, c.name, c.stride); },
                           [&](const BatchNormSpec& b) { return layers::batchnorm(ctx, x, b.name); },
                           [&](const ReluSpec&) { return layers::relu(ctx, x); },
                           [&](const MaxPoolSpec& m) { return ag::maxpool2d(ctx.tape, x, m.window, m.stride); },
                           [&](const GlobalAvgPoolSpec&) { return ag::global_avg_pool(ctx.tape, x); },
                           [&](const DropoutSpec& d) { return layers::dropout(ctx, x, d.p); },
                           [&](const DenseSpec& d) { return layers::dense(ctx, x, d.name); },
                           [&](const ResidualBlockLayer& r) { return layers::residual_block(ctx, x, r.block, r.name); },
                       },
                       layer);
    }
    return x;
}

Tensor Model::predict(const Tensor& images) {
    Tape tape;
    ForwardContext ctx(tape, params_, LayerMode::eval);
    Var x = tape.input(images.dtype() == dtype_ ? images : images.to(dtype_));
    return tape.value(forward(ctx, x));
}

std::vector<Model::ParamLayer> Model::parameter_layers() const {
    std::vector<ParamLayer> out;
    for (const auto& l : flatten(spec_)) {
        ParamLayer pl{l.name, {}};
        switch (l.kind) {
            case FlatLayer::conv:
            case FlatLayer::dense:
                pl.params = {l.name + ".kernel", l.name + ".bias"};
                break;
            case FlatLayer::bn:
                pl.params = {l.name + ".gamma", l.name + ".beta"};
                break;
            default:
                continue;
        }
        out.push_back(std::move(pl));
    }
    return out;
}

double round_significant(double x, int digits) {
    if (x == 0.0) return 0.0;
    const double mag = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(x)))));
    return std::round(x * mag) / mag;
}

std::string format_param_count(std::int64_t n) {
    const double r = round_significant(static_cast<double>(n), 3);
    char buf[32];
    if (r >= 1e6) {
        const double m = r / 1e6;
        std::snprintf(buf, sizeof buf, "%.*fM", m >= 100 ? 0 : (m >= 10 ? 1 : 2), m);
    } else if (r >= 1e3) {
        const double k = r / 1e3;
        std::snprintf(buf, sizeof buf, "%.*fk", k >= 100 ? 0 : (k >= 10 ? 1 : 2), k);
    } else {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(n));
    }
    return buf;
}

}  // namespace rforge
