// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

// Python bindings: model construction and summaries, raw kernels, synthetic
// data, training, gradient-flow probes, checkpoints and the self-tests.
// Arrays cross the boundary as float64 numpy arrays (images as uint8 N,H,W,C).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>

#include "resnet_forge/checkpoint.hpp"
#include "resnet_forge/cli.hpp"
#include "resnet_forge/errors.hpp"
#include "resnet_forge/loss.hpp"
#include "resnet_forge/selftest.hpp"
#include "resnet_forge/train.hpp"

namespace py = pybind11;
using namespace rforge;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

DType parse_dtype(const std::string& s) {
    if (s == "f32" || s == "float32") return DType::f32;
    if (s == "f64" || s == "float64") return DType::f64;
    throw ContractError("dtype must be f32 or f64, got '" + s + "'");
}

Tensor to_tensor(const F64Array& a, DType dtype) {
    std::vector<std::int64_t> dims(a.shape(), a.shape() + a.ndim());
    return Tensor::from(Shape(std::move(dims)), std::span<const double>(a.data(), a.size()), dtype);
}

F64Array to_numpy(const Tensor& t) {
    F64Array out(t.shape().dims());
    auto v = t.to_vector();
    std::memcpy(out.mutable_data(), v.data(), v.size() * sizeof(double));
    return out;
}

ImageSplit split_from_numpy(const U8Array& images, const U8Array& labels, int classes) {
    if (images.ndim() != 4) throw ShapeError("images must be N,H,W,C uint8");
    if (labels.ndim() != 1 || labels.shape(0) != images.shape(0))
        throw ShapeError("labels must be a vector with one entry per image");
    ImageSplit s;
    s.height = images.shape(1);
    s.width = images.shape(2);
    s.channels = images.shape(3);
    s.classes = classes;
    s.pixels.assign(images.data(), images.data() + images.size());
    s.labels.assign(labels.data(), labels.data() + labels.size());
    for (auto l : s.labels)
        if (l >= classes) throw ContractError("label " + std::to_string(l) + " out of range");
    return s;
}

py::tuple split_to_numpy(const ImageSplit& s) {
    U8Array images({s.size(), s.height, s.width, s.channels});
    std::memcpy(images.mutable_data(), s.pixels.data(), s.pixels.size());
    U8Array labels({s.size()});
    std::memcpy(labels.mutable_data(), s.labels.data(), s.labels.size());
    return py::make_tuple(images, labels);
}

py::dict epoch_dict(const EpochRecord& r) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["lr"] = r.lr;
    d["train_loss"] = r.train_loss;
    d["train_acc"] = r.train_acc;
    d["val_loss"] = r.val_loss;
    d["val_acc"] = r.val_acc;
    d["epoch_time_s"] = r.epoch_time_s;
    return d;
}

ModelSpec spec_for(const std::string& name, std::int64_t classes, std::int64_t image_size) {
    ModelSpec spec = build_model(name, classes);
    spec.input = {image_size, image_size, 3};
    return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "ResNet training and gradient-flow toolkit (C++ core)";

    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
    py::register_exception<ContractError>(m, "ContractError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<SpecError>(m, "SpecError", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    auto fmt = py::register_exception<FormatError>(m, "FormatError", base.ptr());
    py::register_exception<CorruptRecordError>(m, "CorruptRecordError", fmt.ptr());

    // Models.
    m.def(
        "count_parameters",
        [](const std::string& name, std::int64_t classes) {
            auto c = count_parameters(build_model(name, classes));
            return py::make_tuple(c.trainable, c.non_trainable);
        },
        py::arg("model"), py::arg("num_classes") = 10, "(trainable, non_trainable) for a named model.");
    m.def(
        "summary",
        [](const std::string& name, std::int64_t classes, bool csv) {
            auto s = model_summary(build_model(name, classes));
            return csv ? s.to_csv() : s.to_text();
        },
        py::arg("model"), py::arg("num_classes") = 10, py::arg("csv") = false);
    m.def("format_param_count", &format_param_count);

    py::class_<Model>(m, "Model")
        .def(py::init([](const std::string& name, std::int64_t classes, std::int64_t image_size,
                         const std::string& dtype, std::uint64_t seed) {
                 return Model(spec_for(name, classes, image_size), parse_dtype(dtype), seed);
             }),
             py::arg("name"), py::arg("num_classes") = 10, py::arg("image_size") = 32, py::arg("dtype") = "f32",
             py::arg("seed") = 42)
        .def_property_readonly("name", [](const Model& m) { return m.spec().name; })
        .def_property_readonly("num_classes", [](const Model& m) { return m.spec().num_classes; })
        .def("predict",
             [](Model& m, const F64Array& images) { return to_numpy(m.predict(to_tensor(images, m.dtype()))); },
             py::arg("images"), "Eval-mode logits for N,H,W,C images in [-1,1].")
        .def("parameter_names",
             [](const Model& m) {
                 std::vector<std::string> names;
                 for (const auto& p : m.parameters().all()) names.push_back(p.name);
                 return names;
             })
        .def("get_parameter",
             [](const Model& m, const std::string& name) { return to_numpy(m.parameters().get(name).value); })
        .def("set_parameter",
             [](Model& m, const std::string& name, const F64Array& value) {
                 auto& p = m.parameters().get(name);
                 Tensor t = to_tensor(value, p.value.dtype());
                 if (!(t.shape() == p.value.shape()))
                     throw ShapeError(name + ": expected " + p.value.shape().str() + ", got " + t.shape().str());
                 p.value = std::move(t);
             })
        .def("parameter_layers",
             [](const Model& m) {
                 std::vector<std::pair<std::string, std::vector<std::string>>> out;
                 for (auto& l : m.parameter_layers()) out.emplace_back(l.name, l.params);
                 return out;
             })
        .def(
            "gradient_flow",
            [](Model& m, const F64Array& images, const F64Array& onehot) {
                auto rec = gradient_flow_probe(m, to_tensor(images, m.dtype()), to_tensor(onehot, m.dtype()));
                std::vector<std::tuple<std::string, std::int64_t, double>> rows;
                for (auto& r : rec.rows) rows.emplace_back(r.layer, r.depth, r.grad_l2);
                return rows;
            },
            py::arg("images"), py::arg("onehot"),
            "Per-layer gradient L2 norms (layer, depth, norm) on one batch, batch-norm on batch statistics.")
        .def("save",
             [](const Model& m, const std::filesystem::path& path, std::uint64_t seed) {
                 save_checkpoint(make_checkpoint(m, 0, 0.0, seed), path);
             },
             py::arg("path"), py::arg("seed") = 42);

    m.def(
        "load_model", [](const std::filesystem::path& path) { return model_from_checkpoint(load_checkpoint(path)); },
        py::arg("path"));

    // Kernels.
    m.def(
        "conv2d",
        [](const F64Array& x, const F64Array& k, const F64Array& b, std::int64_t stride, const std::string& pad) {
            Padding p = pad == "same" ? Padding::same : pad == "valid" ? Padding::valid
                                                                       : throw ContractError("padding: same|valid");
            return to_numpy(ops::conv2d(to_tensor(x, DType::f64), to_tensor(k, DType::f64),
                                        to_tensor(b, DType::f64), stride, p));
        },
        py::arg("input"), py::arg("kernel"), py::arg("bias"), py::arg("stride") = 1, py::arg("padding") = "same",
        "NHWC input, kernel [kh,kw,in,out], double precision.");
    m.def(
        "matmul",
        [](const F64Array& a, const F64Array& b) {
            return to_numpy(ops::matmul(to_tensor(a, DType::f64), to_tensor(b, DType::f64)));
        },
        py::arg("a"), py::arg("b"));
    m.def(
        "softmax_cross_entropy",
        [](const F64Array& logits, const F64Array& onehot) {
            auto r = softmax_cross_entropy(to_tensor(logits, DType::f64), to_tensor(onehot, DType::f64));
            return py::make_tuple(r.loss, to_numpy(r.dlogits));
        },
        py::arg("logits"), py::arg("onehot"), "Mean loss and its gradient w.r.t. the logits.");

    // Data.
    m.def(
        "make_synthetic_split",
        [](std::int64_t n, int classes, std::int64_t image_size, std::uint64_t seed) {
            return split_to_numpy(make_synthetic_split(n, classes, image_size, seed));
        },
        py::arg("n"), py::arg("classes") = 4, py::arg("image_size") = 16, py::arg("seed") = 42,
        "(images uint8 N,H,W,C, labels uint8 N) of class-separable noise images.");
    m.def(
        "read_cifar_file",
        [](const std::filesystem::path& path) { return split_to_numpy(to_split(read_cifar_file(path))); },
        py::arg("path"));
    m.def("normalize_byte", &normalize_byte);

    // Training.
    m.def(
        "train",
        [](Model& model, const U8Array& train_images, const U8Array& train_labels, const U8Array& val_images,
           const U8Array& val_labels, std::int64_t epochs, std::int64_t batch_size, std::uint64_t seed, double lr,
           bool augment, std::optional<std::filesystem::path> out_dir) {
            int classes = static_cast<int>(model.spec().num_classes);
            ImageSplit tr = split_from_numpy(train_images, train_labels, classes);
            ImageSplit va = split_from_numpy(val_images, val_labels, classes);
            TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.seed = seed;
            cfg.adam.lr0 = lr;
            cfg.augment.enabled = augment;
            cfg.deterministic = true;
            cfg.out_dir = out_dir;
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train_model(model, tr, va, cfg);
            }
            py::list history;
            for (auto& rec : r.history.records()) history.append(epoch_dict(rec));
            py::dict out;
            out["history"] = history;
            out["early_stopped"] = r.early_stopped;
            out["diverged"] = r.diverged;
            out["error"] = r.error;
            out["step_losses"] = r.step_losses;
            return out;
        },
        py::arg("model"), py::arg("train_images"), py::arg("train_labels"), py::arg("val_images"),
        py::arg("val_labels"), py::arg("epochs") = 30, py::arg("batch_size") = 64, py::arg("seed") = 42,
        py::arg("lr") = 1e-3, py::arg("augment") = true, py::arg("out_dir") = py::none(),
        "Trains in place with Adam, plateau decay and early stopping; returns the history.");

    // Self-tests.
    m.def("gradient_check_names", &gradient_check_names, py::arg("include_full_model") = true);
    m.def(
        "gradient_check",
        [](const std::string& name, std::int64_t coords, std::uint64_t seed) {
            GradCheckOptions o;
            o.coords_per_param = coords;
            o.seed = seed;
            auto r = run_gradient_check(name, o);
            py::dict d;
            d["layer_type"] = r.layer_type;
            d["max_rel_error"] = r.max_rel_error;
            d["worst_param"] = r.worst_param;
            d["coords"] = r.coords;
            d["passed"] = r.passed;
            return d;
        },
        py::arg("name"), py::arg("coords_per_param") = 64, py::arg("seed") = 42);
    m.def(
        "conv_oracle_check",
        [](std::int64_t trials, std::uint64_t seed) {
            auto r = run_conv_oracle_check(trials, seed);
            return py::make_tuple(r.passed, r.max_abs_diff);
        },
        py::arg("trials") = 50, py::arg("seed") = 42);

    // The command line, in-process.
    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "resnet_forge");
            std::vector<const char*> argv;
            for (auto& a : args) argv.push_back(a.c_str());
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a resnet_forge command; returns (exit_code, stdout, stderr).");
}
