// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "resnet_forge/checkpoint.hpp"
#include "resnet_forge/selftest.hpp"
#include "resnet_forge/train.hpp"

namespace rforge {
namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr const char* kDataEnv = "RESNET_FORGE_DATA_DIR";

// Everything any subcommand can be told. Defaults are the standard
// training setup: Adam at 1e-3, batch 64, up to 30 epochs, seed 42.
struct RunOptions {
    std::string model = "mini_resnet";
    bool skip = true;
    std::string data_dir;
    std::string out = "runs/latest";
    std::int64_t epochs = 30;
    std::int64_t batch_size = 64;
    std::uint64_t seed = 42;
    double lr0 = 1e-3;
    std::int64_t val_size = 5000;
    std::int64_t subset = 0;
    bool augment = true;
    std::int64_t prefetch = 0;
    bool deterministic = false;
    std::int64_t plateau_patience = 3;
    std::int64_t early_stop_patience = 7;

    bool synthetic = false;
    std::int64_t n = 64;
    int classes = 4;
    std::int64_t image_size = 16;
    std::int64_t val_n = 0;

    // eval / gradflow
    std::string checkpoint;
    std::string split = "test";
    std::int64_t probe_batch = 64;

    // ablate
    std::int64_t seeds = 1;
    double loss_threshold = 1.0;

    // summary
    bool csv = false;
    int summary_classes = 10;

    // selftest
    bool quick = false;
    std::string inject_fault;
    std::int64_t coords = 64;
};

std::string with_commas(std::int64_t v) {
    std::string s = std::to_string(v < 0 ? -v : v);
    for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
    return (v < 0 ? "-" : "") + s;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------- options

void add_data_options(CLI::App* c, RunOptions& o) {
    c->add_option("--data-dir", o.data_dir, std::string("CIFAR-10 binary directory (falls back to $") + kDataEnv + ")");
    c->add_option("--val-size", o.val_size, "Validation examples held out of the CIFAR training set")
        ->capture_default_str();
    c->add_option("--subset", o.subset, "Use only the first N training examples (0 = all)")->capture_default_str();
    c->add_flag("--synthetic", o.synthetic, "Use a generated separable dataset instead of CIFAR-10");
    c->add_option("--n", o.n, "Synthetic training examples")->capture_default_str();
    c->add_option("--classes", o.classes, "Synthetic classes")->capture_default_str();
    c->add_option("--image-size", o.image_size, "Synthetic image side")->capture_default_str();
    c->add_option("--val-n", o.val_n, "Synthetic validation examples (0 = max(classes, n/4))")->capture_default_str();
    c->add_option("--seed", o.seed, "Root seed for init, shuffling, augmentation and dropout")->capture_default_str();
}

void add_model_options(CLI::App* c, RunOptions& o) {
    c->add_option("--model", o.model, "baseline | mini_resnet | resnet18")->capture_default_str();
    c->add_flag("--skip,!--no-skip", o.skip, "ResNet-18 with or without skip connections [skip]");
}

void add_train_options(CLI::App* c, RunOptions& o) {
    c->add_option("--epochs", o.epochs, "Epoch budget")->capture_default_str();
    c->add_option("--batch-size", o.batch_size, "Mini-batch size")->capture_default_str();
    c->add_option("--lr0", o.lr0, "Initial Adam learning rate")->capture_default_str();
    c->add_option("--plateau-patience", o.plateau_patience, "Epochs without improvement before lr *= 0.2")
        ->capture_default_str();
    c->add_option("--early-stop-patience", o.early_stop_patience, "Epochs without improvement before stopping")
        ->capture_default_str();
    c->add_flag("--augment,!--no-augment", o.augment, "Random flip + brightness on training batches [augment]");
    c->add_option("--prefetch", o.prefetch, "Batches prepared ahead on a worker thread (0 = sequential)")
        ->capture_default_str();
    c->add_flag("--deterministic", o.deterministic, "Write epoch_time_s as 0 so history.csv depends on the seed only");
}

// ---------------------------------------------------------------- config file

// key=value lines, '#' starts a comment. Keys are long flag names with or
// without the leading dashes; '_' and '-' are interchangeable.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config file '" + path + "'");
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        while (!key.empty() && key.front() == '-') key.erase(key.begin());
        std::replace(key.begin(), key.end(), '_', '-');
        kv.emplace_back(key, trim(line.substr(eq + 1)));
    }
    return kv;
}

std::set<std::string> long_names(const CLI::App* c) {
    std::set<std::string> names;
    for (const auto* opt : c->get_options())
        for (const auto& ln : opt->get_lnames()) names.insert(ln);
    return names;
}

// Rewrites argv so values from --config come first and explicit flags, being
// later, win. Keys another subcommand understands are skipped, so one
// config.txt can feed train, eval and gradflow alike.
std::vector<std::string> expand_config(const std::vector<std::string>& args, const CLI::App& app) {
    if (args.size() < 2) return args;
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands({}))
        if (s->get_name() == args[1]) sub = s;
    if (!sub) return args;

    std::string config;
    std::vector<std::string> rest;
    for (std::size_t i = 2; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    std::vector<std::string> out = {args[0], args[1]};
    if (!config.empty()) {
        const auto mine = long_names(sub);
        std::set<std::string> anyone;
        for (const auto* s : app.get_subcommands({})) {
            const auto n = long_names(s);
            anyone.insert(n.begin(), n.end());
        }
        for (const auto& [key, value] : read_config_file(config)) {
            if (key == "config") continue;
            if (mine.contains(key)) {
                out.push_back("--" + key + "=" + value);
            } else if (!anyone.contains(key)) {
                throw UsageError("unknown key '" + key + "' in config file '" + config + "'");
            }
        }
    }
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

// ---------------------------------------------------------------- data / models

struct Data {
    ImageSplit train, val, test;
    std::string source;
};

Data load_data(const RunOptions& o, std::ostream& out) {
    Data d;
    if (o.synthetic) {
        if (o.n < o.classes || o.classes < 2) throw UsageError("--synthetic needs --classes >= 2 and --n >= classes");
        if (o.image_size < 1) throw UsageError("--image-size must be >= 1");
        const std::int64_t vn = o.val_n > 0 ? o.val_n : std::max<std::int64_t>(o.classes, o.n / 4);
        d.train = make_synthetic_split(o.n, o.classes, o.image_size, derive_seed(o.seed, streams::synthetic, {1}));
        d.val = make_synthetic_split(vn, o.classes, o.image_size, derive_seed(o.seed, streams::synthetic, {2}));
        d.test = make_synthetic_split(vn, o.classes, o.image_size, derive_seed(o.seed, streams::synthetic, {3}));
        d.source = "synthetic";
    } else {
        std::string dir = o.data_dir;
        if (dir.empty())
            if (const char* env = std::getenv(kDataEnv)) dir = env;
        if (dir.empty())
            throw UsageError(std::string("no data: pass --data-dir, set ") + kDataEnv + ", or use --synthetic");
        const auto raw = load_cifar10(dir);
        auto tv = holdout_split(to_split(raw.train), o.val_size, o.seed);
        d.train = o.subset > 0 ? take_first(tv.train, std::min(o.subset, tv.train.size())) : std::move(tv.train);
        d.val = std::move(tv.val);
        d.test = to_split(raw.test);
        d.source = dir;
    }
    out << "data: " << d.source << " (train " << d.train.size() << ", val " << d.val.size() << ", test "
        << d.test.size() << ")\n";
    return d;
}

std::string model_name(const RunOptions& o) {
    if (o.model == "resnet18") return o.skip ? "resnet18" : "resnet18_noskip";
    if (o.model == "baseline" || o.model == "mini_resnet" || o.model == "resnet18_noskip") return o.model;
    throw UsageError("unknown model '" + o.model + "' (expected baseline, mini_resnet or resnet18)");
}

ModelSpec spec_for(const std::string& name, const ImageSplit& split) {
    auto spec = build_model(name, split.classes);
    spec.input = {split.height, split.width, split.channels};
    return spec;
}

void log_params(const ModelSpec& spec, std::ostream& out) {
    const auto pc = count_parameters(spec);
    out << "model " << spec.name << ": " << with_commas(pc.trainable) << " trainable parameters ("
        << format_param_count(pc.trainable) << "), " << with_commas(pc.non_trainable) << " non-trainable\n";
}

Model model_from(const Checkpoint& ck, const ImageSplit& split) {
    const Tensor* bias = ck.find("head.dense.bias");
    if (!bias) throw FormatError("checkpoint has no head.dense.bias; cannot infer class count");
    if (bias->numel() != split.classes)
        throw ContractError("checkpoint predicts " + std::to_string(bias->numel()) + " classes, data has " +
                            std::to_string(split.classes));
    Model m(spec_for(ck.model, split), DType::f32, ck.seed);
    apply_checkpoint(ck, m);
    return m;
}

TrainConfig train_config(const RunOptions& o, std::uint64_t seed) {
    TrainConfig c;
    c.epochs = o.epochs;
    c.batch_size = o.batch_size;
    c.seed = seed;
    c.adam.lr0 = o.lr0;
    c.plateau.patience = o.plateau_patience;
    c.early_stop.patience = o.early_stop_patience;
    c.augment.enabled = o.augment;
    c.prefetch_depth = o.prefetch;
    c.deterministic = o.deterministic;
    return c;
}

std::string config_echo(const RunOptions& o, const std::string& model) {
    std::ostringstream os;
    os << "# resolved run configuration\n"
       << "model=" << (model == "resnet18_noskip" ? "resnet18" : model) << '\n'
       << "skip=" << (model == "resnet18_noskip" ? "false" : "true") << '\n';
    if (!o.synthetic) os << "data-dir=" << o.data_dir << '\n';
    os << "out=" << o.out << '\n'
       << "epochs=" << o.epochs << '\n'
       << "batch-size=" << o.batch_size << '\n'
       << "seed=" << o.seed << '\n'
       << "lr0=" << fmt("%.17g", o.lr0) << '\n'
       << "plateau-patience=" << o.plateau_patience << '\n'
       << "early-stop-patience=" << o.early_stop_patience << '\n'
       << "augment=" << (o.augment ? "true" : "false") << '\n'
       << "prefetch=" << o.prefetch << '\n'
       << "deterministic=" << (o.deterministic ? "true" : "false") << '\n'
       << "val-size=" << o.val_size << '\n'
       << "subset=" << o.subset << '\n'
       << "synthetic=" << (o.synthetic ? "true" : "false") << '\n'
       << "n=" << o.n << '\n'
       << "classes=" << o.classes << '\n'
       << "image-size=" << o.image_size << '\n'
       << "val-n=" << o.val_n << '\n';
    return os.str();
}

void print_epoch(std::ostream& out, const std::string& tag, const EpochRecord& r, std::int64_t budget) {
    out << tag << "epoch " << r.epoch << '/' << budget << "  lr " << fmt("%.3g", r.lr) << "  train_loss "
        << fmt("%.4f", r.train_loss) << "  train_acc " << fmt("%.4f", r.train_acc) << "  val_loss "
        << fmt("%.4f", r.val_loss) << "  val_acc " << fmt("%.4f", r.val_acc) << "  (" << fmt("%.1f", r.epoch_time_s)
        << " s)\n"
        << std::flush;
}

// ---------------------------------------------------------------- commands

int cmd_train(const RunOptions& o, std::ostream& out, std::ostream& err) {
    const std::string name = model_name(o);
    const Data data = load_data(o, out);
    const auto spec = spec_for(name, data.train);
    log_params(spec, out);
    Model model(spec, DType::f32, o.seed);

    const fs::path dir = o.out;
    fs::create_directories(dir);
    write_text_file(dir / "config.txt", config_echo(o, name));
    auto cfg = train_config(o, o.seed);
    cfg.out_dir = dir;
    cfg.on_epoch = [&](const EpochRecord& r) { print_epoch(out, "", r, o.epochs); };
    const auto res = train_model(model, data.train, data.val, cfg);
    if (res.diverged) {
        err << "error: " << res.error << " (partial history in " << (dir / "history.csv").string() << ")\n";
        return kExitFailure;
    }
    if (res.early_stopped) out << "early stop after epoch " << res.history.back().epoch << '\n';
    if (res.best)
        out << "best epoch " << res.best->epoch << " val_loss " << fmt("%.6f", res.best->val_loss) << " -> "
            << (dir / "best.ckpt").string() << '\n';
    return kExitOk;
}

int cmd_eval(const RunOptions& o, std::ostream& out, std::ostream&) {
    if (o.checkpoint.empty()) throw UsageError("eval needs --checkpoint");
    const auto ck = load_checkpoint(o.checkpoint);
    const Data data = load_data(o, out);
    const ImageSplit* split = o.split == "test"  ? &data.test
                              : o.split == "val" ? &data.val
                              : o.split == "train" ? &data.train
                                                   : nullptr;
    if (!split) throw UsageError("--split must be test, val or train");
    Model model = model_from(ck, *split);
    const auto res = evaluate(model, *split, o.batch_size);
    const auto report = classification_report(res.confusion);

    const fs::path dir = o.out.empty() ? fs::path(o.checkpoint).parent_path() : fs::path(o.out);
    if (!dir.empty()) fs::create_directories(dir);
    write_text_file(dir / "confusion.csv", res.confusion.to_csv());
    write_text_file(dir / "report.csv", report.to_csv());
    out << "model " << ck.model << " (epoch " << ck.epoch << ") on " << o.split << " split of " << split->size()
        << ": loss " << fmt("%.6f", res.loss) << "  accuracy " << fmt("%.6f", res.accuracy) << '\n'
        << "macro precision " << fmt("%.4f", report.macro.precision) << "  recall "
        << fmt("%.4f", report.macro.recall) << "  f1 " << fmt("%.4f", report.macro.f1) << '\n';
    return kExitOk;
}

int cmd_gradflow(const RunOptions& o, std::ostream& out, std::ostream&) {
    const Data data = load_data(o, out);
    std::optional<Model> model;
    std::string state = "init";
    if (!o.checkpoint.empty()) {
        model.emplace(model_from(load_checkpoint(o.checkpoint), data.train));
        state = "trained";
    } else {
        const auto spec = spec_for(model_name(o), data.train);
        log_params(spec, out);
        model.emplace(spec, DType::f32, o.seed);
    }
    const auto batch = make_probe_batch(data.train, std::min(o.probe_batch, data.train.size()), o.seed, DType::f32);
    const auto rec = gradient_flow_probe(*model, batch.images, batch.onehot);
    const fs::path dir = o.out;
    fs::create_directories(dir);
    write_text_file(dir / "gradflow.csv", rec.to_csv());
    out << model->spec().name << " (" << state << "): " << rec.rows.size() << " layers, first/last gradient norm ratio "
        << fmt("%.6g", rec.vanishing_ratio()) << " -> " << (dir / "gradflow.csv").string() << '\n';
    return kExitOk;
}

std::int64_t steps_to_threshold(const std::vector<double>& losses, double threshold) {
    for (std::size_t i = 0; i < losses.size(); ++i)
        if (losses[i] <= threshold) return static_cast<std::int64_t>(i) + 1;
    return -1;
}

int cmd_ablate(const RunOptions& o, std::ostream& out, std::ostream& err) {
    if (o.seeds < 1) throw UsageError("--seeds must be >= 1");
    const Data data = load_data(o, out);
    const fs::path root = o.out;
    fs::create_directories(root);
    write_text_file(root / "config.txt", config_echo(o, "resnet18") + "seeds=" + std::to_string(o.seeds) +
                                             "\nloss-threshold=" + fmt("%.17g", o.loss_threshold) + '\n');

    std::ostringstream csv;
    csv << "seed,skip_train_loss,noskip_train_loss,skip_val_acc,noskip_val_acc,delta_val_acc,"
           "skip_steps_to_threshold,noskip_steps_to_threshold\n";
    int skip_wins = 0;
    bool failed = false;
    for (std::int64_t k = 0; k < o.seeds; ++k) {
        const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(k);
        TrainResult runs[2];
        for (int v = 0; v < 2; ++v) {
            const bool skip = v == 0;
            const auto spec = spec_for(skip ? "resnet18" : "resnet18_noskip", data.train);
            if (k == 0) log_params(spec, out);
            Model model(spec, DType::f32, seed);
            auto cfg = train_config(o, seed);
            cfg.out_dir = root / ("seed_" + std::to_string(seed)) / (skip ? "skip" : "noskip");
            const std::string tag = "[seed " + std::to_string(seed) + (skip ? " skip] " : " noskip] ");
            cfg.on_epoch = [&](const EpochRecord& r) { print_epoch(out, tag, r, o.epochs); };
            runs[v] = train_model(model, data.train, data.val, cfg);
            if (runs[v].diverged) {
                err << "error: " << tag << runs[v].error << '\n';
                failed = true;
            }
        }
        if (runs[0].history.empty() || runs[1].history.empty()) continue;
        const auto& a = runs[0].history.back();
        const auto& b = runs[1].history.back();
        skip_wins += a.train_loss <= b.train_loss;
        csv << seed << ',' << fmt("%.17g", a.train_loss) << ',' << fmt("%.17g", b.train_loss) << ','
            << fmt("%.17g", a.val_acc) << ',' << fmt("%.17g", b.val_acc) << ',' << fmt("%.17g", a.val_acc - b.val_acc)
            << ',' << steps_to_threshold(runs[0].step_losses, o.loss_threshold) << ','
            << steps_to_threshold(runs[1].step_losses, o.loss_threshold) << '\n';
        out << "seed " << seed << ": final train loss skip " << fmt("%.4f", a.train_loss) << " vs no-skip "
            << fmt("%.4f", b.train_loss) << ", val_acc delta (skip - no-skip) " << fmt("%+.4f", a.val_acc - b.val_acc)
            << '\n';
    }
    write_text_file(root / "ablation.csv", csv.str());
    out << "skip final train loss <= no-skip in " << skip_wins << '/' << o.seeds << " seeds -> "
        << (root / "ablation.csv").string() << '\n';
    return failed ? kExitFailure : kExitOk;
}

int cmd_summary(const RunOptions& o, std::ostream& out, std::ostream&) {
    const auto spec = build_model(model_name(o), o.summary_classes);
    const auto s = model_summary(spec);
    if (o.csv) {
        out << s.to_csv();
    } else {
        out << s.to_text();
        log_params(spec, out);
    }
    return kExitOk;
}

int cmd_selftest(const RunOptions& o, std::ostream& out, std::ostream& err) {
    struct FaultGuard {
        ~FaultGuard() { testing::clear_backward_faults(); }
    } guard;
    if (!o.inject_fault.empty()) {
        static const std::set<std::string> ops = {
            "add",       "sub",     "mul",        "scale",     "relu",    "sum",
            "reshape",   "matmul",  "bias_add",   "conv2d",    "maxpool2d", "global_avg_pool",
            "dropout",   "batch_norm", "batch_norm_eval", "softmax_cross_entropy"};
        std::string op = o.inject_fault;
        double factor = 2.0;
        if (const auto colon = op.find(':'); colon != std::string::npos) {
            try {
                factor = std::stod(op.substr(colon + 1));
            } catch (const std::exception&) {
                throw UsageError("--inject-fault expects OP or OP:FACTOR");
            }
            op.resize(colon);
        }
        if (!ops.contains(op)) throw UsageError("--inject-fault: unknown op '" + op + "'");
        testing::set_backward_fault(op, factor);
        err << "warning: backward rule of '" << op << "' scaled by " << factor << '\n';
    }

    bool ok = true;
    const auto conv = run_conv_oracle_check(50, o.seed);
    out << "oracle  " << std::left << std::setw(24) << conv.name << std::right << " trials " << conv.trials
        << "  max_abs_diff " << fmt("%.3e", conv.max_abs_diff) << "  " << (conv.passed ? "PASS" : "FAIL") << '\n';
    ok &= conv.passed;

    GradCheckOptions gopt;
    gopt.seed = o.seed;
    gopt.coords_per_param = o.coords;
    gopt.include_full_model = !o.quick;
    for (const auto& name : gradient_check_names(gopt.include_full_model)) {
        const auto r = run_gradient_check(name, gopt);
        out << "grad    " << std::left << std::setw(24) << r.layer_type << std::right << " max_rel_error "
            << fmt("%.3e", r.max_rel_error) << "  coords " << r.coords << "  " << (r.passed ? "PASS" : "FAIL") << '\n'
            << std::flush;
        ok &= r.passed;
    }
    out << (ok ? "selftest passed\n" : "selftest FAILED\n");
    return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunOptions o;
    CLI::App app("Residual CNNs for CIFAR-10 on a from-scratch CPU engine", "resnet_forge");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    const char* config_help = "key=value file (# comments); flags override it, it overrides defaults";
    std::string unused_config;

    auto* train = app.add_subcommand("train", "Train a model; writes history.csv, best.ckpt, config.txt");
    add_model_options(train, o);
    add_data_options(train, o);
    add_train_options(train, o);
    train->add_option("--out", o.out, "Output directory")->capture_default_str();
    train->add_option("--config", unused_config, config_help);

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; writes confusion.csv, report.csv");
    eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file")->required();
    eval->add_option("--split", o.split, "test | val | train")->capture_default_str();
    eval->add_option("--batch-size", o.batch_size, "Evaluation batch size")->capture_default_str();
    add_data_options(eval, o);
    eval->add_option("--out", o.out, "Output directory (default: the checkpoint's directory)");
    eval->add_option("--config", unused_config, config_help);

    auto* gradflow = app.add_subcommand("gradflow", "Per-layer gradient L2 norms on one batch; writes gradflow.csv");
    add_model_options(gradflow, o);
    add_data_options(gradflow, o);
    gradflow->add_option("--checkpoint", o.checkpoint, "Probe trained weights instead of He init");
    gradflow->add_option("--probe-batch", o.probe_batch, "Probe batch size")->capture_default_str();
    gradflow->add_option("--out", o.out, "Output directory")->capture_default_str();
    gradflow->add_option("--config", unused_config, config_help);

    auto* ablate = app.add_subcommand("ablate", "Train ResNet-18 with and without skips on identical seeds");
    add_data_options(ablate, o);
    add_train_options(ablate, o);
    ablate->add_option("--seeds", o.seeds, "Number of seeds (seed, seed+1, ...)")->capture_default_str();
    ablate->add_option("--loss-threshold", o.loss_threshold, "Training loss for the steps-to-threshold column")
        ->capture_default_str();
    ablate->add_option("--out", o.out, "Output directory")->capture_default_str();
    ablate->add_option("--config", unused_config, config_help);

    auto* summary = app.add_subcommand("summary", "Print a layer table and parameter counts");
    add_model_options(summary, o);
    summary->add_option("--classes", o.summary_classes, "Output classes")->capture_default_str();
    summary->add_flag("--csv", o.csv, "CSV instead of a table");

    auto* selftest = app.add_subcommand("selftest", "Conv oracle and finite-difference gradient checks");
    selftest->add_flag("--quick", o.quick, "Skip the full Mini-ResNet check");
    selftest->add_option("--coords", o.coords, "Coordinates checked per parameter")->capture_default_str();
    selftest->add_option("--seed", o.seed, "Seed for inputs and probed coordinates")->capture_default_str();
    selftest->add_option("--inject-fault", o.inject_fault, "Scale the backward rule of OP[:FACTOR] (test hook)");

    std::vector<std::string> args(argv, argv + argc);
    try {
        args = expand_config(args, app);
        // The vector overload takes the arguments reversed, without argv[0].
        std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*train) return cmd_train(o, out, err);
        if (*eval) return cmd_eval(o, out, err);
        if (*gradflow) return cmd_gradflow(o, out, err);
        if (*ablate) return cmd_ablate(o, out, err);
        if (*summary) return cmd_summary(o, out, err);
        if (*selftest) return cmd_selftest(o, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace rforge
