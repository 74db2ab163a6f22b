// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include "resnet_forge/history.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "resnet_forge/errors.hpp"

namespace rforge {

void History::append(const EpochRecord& r) {
    if (r.epoch != static_cast<std::int64_t>(records_.size()) + 1)
        throw ContractError("History: epoch " + std::to_string(r.epoch) + " is not consecutive");
    if (!std::isfinite(r.train_loss) || !std::isfinite(r.val_loss)) throw NumericError("History: non-finite loss");
    records_.push_back(r);
}

std::string History::to_csv() const {
    std::string out = std::string(kHistoryHeader) + "\n";
    char buf[256];
    for (const auto& r : records_) {
        std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(r.epoch),
                      r.lr, r.train_loss, r.train_acc, r.val_loss, r.val_acc, r.epoch_time_s);
        out += buf;
    }
    return out;
}

History History::from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kHistoryHeader) throw FormatError("history: missing or wrong header");
    History h;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        if (cells.size() != 7) throw FormatError("history: expected 7 columns in '" + line + "'");
        auto num = [&](std::size_t i) {
            char* end = nullptr;
            const double v = std::strtod(cells[i].c_str(), &end);
            if (end == cells[i].c_str() || *end != '\0') throw FormatError("history: bad number '" + cells[i] + "'");
            return v;
        };
        EpochRecord r;
        r.epoch = static_cast<std::int64_t>(num(0));
        r.lr = num(1);
        r.train_loss = num(2);
        r.train_acc = num(3);
        r.val_loss = num(4);
        r.val_acc = num(5);
        r.epoch_time_s = num(6);
        h.append(r);
    }
    return h;
}

void History::save(const std::filesystem::path& path) const {
    write_text_file(path, to_csv());
}

History History::load(const std::filesystem::path& path) {
    return from_csv(read_text_file(path));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
    f << text;
    if (!f) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace rforge
