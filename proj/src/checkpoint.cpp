// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "resnet_forge/models.hpp"

namespace rforge {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr char kMagic[4] = {'R', 'N', 'C', 'K'};

class Writer {
public:
    template <typename U>
    void put(U v) {
        if constexpr (std::is_floating_point_v<U>) {
            using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
            put(std::bit_cast<Bits>(v));
        } else {
            for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    void str16(const std::string& s) {
        if (s.size() > 0xFFFF) throw ContractError("checkpoint: name longer than 65535 bytes");
        put(static_cast<std::uint16_t>(s.size()));
        bytes(s.data(), s.size());
    }

    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : buf(b) {}

    template <typename U>
    U get() {
        if constexpr (std::is_floating_point_v<U>) {
            using Bits = std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint64_t>;
            return std::bit_cast<U>(get<Bits>());
        } else {
            need(sizeof(U));
            U v = 0;
            for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(buf[pos + i]) << (8 * i));
            pos += sizeof(U);
            return v;
        }
    }
    std::string str16() {
        const auto n = get<std::uint16_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
        pos += n;
        return s;
    }
    void need(std::size_t n) const {
        if (buf.size() - pos < n) throw FormatError("checkpoint: truncated at byte " + std::to_string(pos));
    }
    bool done() const { return pos == buf.size(); }

    std::span<const std::uint8_t> buf;
    std::size_t pos = 0;
};

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t.value;
    return nullptr;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kMagic, 4);
    w.put(kVersion);
    w.put(static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        w.str16(name);
        w.put(static_cast<std::uint8_t>(t.dtype()));
        if (t.rank() > 255) throw ContractError("checkpoint: rank > 255");
        w.put(static_cast<std::uint8_t>(t.rank()));
        for (auto d : t.shape().dims()) w.put(static_cast<std::uint32_t>(d));
        dispatch(t.dtype(), [&]<typename T>() {
            for (T v : t.data<T>()) w.put(v);
        });
    }
    w.str16(ckpt.model);
    w.put(ckpt.epoch);
    w.put(ckpt.val_loss);
    w.put(ckpt.seed);
    return std::move(w.out);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.need(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic (expected RNCK)");
    r.pos = 4;
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>();
    Checkpoint ck;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor nt;
        nt.name = r.str16();
        const auto code = r.get<std::uint8_t>();
        if (code > 1) throw FormatError("checkpoint: unknown dtype code " + std::to_string(code));
        const auto rank = r.get<std::uint8_t>();
        if (rank == 0) throw FormatError("checkpoint: tensor '" + nt.name + "' has rank 0");
        std::vector<std::int64_t> dims(rank);
        std::int64_t numel = 1;
        for (auto& d : dims) {
            d = r.get<std::uint32_t>();
            if (d == 0) throw FormatError("checkpoint: zero dimension in '" + nt.name + "'");
            numel *= d;
        }
        const auto dtype = static_cast<DType>(code);
        r.need(static_cast<std::size_t>(numel) * (dtype == DType::f32 ? 4 : 8));
        nt.value = Tensor(Shape(dims), dtype);
        dispatch(dtype, [&]<typename T>() {
            for (auto& v : nt.value.data<T>()) v = r.get<T>();
        });
        ck.tensors.push_back(std::move(nt));
    }
    ck.model = r.str16();
    ck.epoch = r.get<std::uint32_t>();
    ck.val_loss = r.get<double>();
    ck.seed = r.get<std::uint64_t>();
    if (!r.done()) throw FormatError("checkpoint: trailing bytes after metadata");
    return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(ckpt);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

Checkpoint make_checkpoint(const Model& model, std::uint32_t epoch, double val_loss, std::uint64_t seed,
                           const AdamState* optimizer) {
    Checkpoint ck;
    ck.model = model.spec().name;
    ck.epoch = epoch;
    ck.val_loss = val_loss;
    ck.seed = seed;
    for (const auto& p : model.parameters().all()) ck.tensors.push_back({p.name, p.value});
    if (optimizer) {
        const std::string pre(kOptimizerPrefix);
        for (const auto& [name, t] : optimizer->m) ck.tensors.push_back({pre + "m/" + name, t});
        for (const auto& [name, t] : optimizer->v) ck.tensors.push_back({pre + "v/" + name, t});
        ck.tensors.push_back({pre + "t", Tensor::full(Shape{1}, static_cast<double>(optimizer->t), DType::f64)});
    }
    return ck;
}

void apply_checkpoint(const Checkpoint& ckpt, Model& model, AdamState* optimizer) {
    auto& store = model.parameters();
    std::size_t loaded = 0;
    AdamState opt;
    const std::string pre(kOptimizerPrefix);
    for (const auto& [name, t] : ckpt.tensors) {
        if (name.starts_with(pre)) {
            const std::string rest = name.substr(pre.size());
            if (rest == "t") opt.t = static_cast<std::int64_t>(t.at(0));
            else if (rest.starts_with("m/")) opt.m.emplace(rest.substr(2), t);
            else if (rest.starts_with("v/")) opt.v.emplace(rest.substr(2), t);
            else throw FormatError("checkpoint: unknown optimizer entry '" + name + "'");
            continue;
        }
        Parameter* p = store.find(name);
        if (!p) throw FormatError("checkpoint: tensor '" + name + "' is not a parameter of " + model.spec().name);
        if (p->value.shape() != t.shape())
            throw ShapeError("checkpoint: '" + name + "' has shape " + t.shape().str() + ", model expects " +
                             p->value.shape().str());
        p->value = t.to(p->value.dtype());
        ++loaded;
    }
    if (loaded != store.size())
        throw FormatError("checkpoint: holds " + std::to_string(loaded) + " of " + std::to_string(store.size()) +
                          " parameters");
    if (optimizer) *optimizer = std::move(opt);
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
    DType dtype = DType::f32;
    if (!ckpt.tensors.empty()) dtype = ckpt.tensors.front().value.dtype();
    // The class count is not in the metadata; the classifier bias carries it.
    const Tensor* head = ckpt.find("head.dense.bias");
    if (!head) throw FormatError("checkpoint: no head.dense.bias tensor");
    Model model(build_model(ckpt.model, head->dim(0)), dtype, ckpt.seed);
    apply_checkpoint(ckpt, model);
    return model;
}

}  // namespace rforge
