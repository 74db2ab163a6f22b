// Copyright (c) 2026, The resnet-forge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "resnet_forge/cli.hpp"
#include "resnet_forge/data.hpp"
#include "resnet_forge/history.hpp"
#include "resnet_forge/models.hpp"
#include "resnet_forge/selftest.hpp"

using namespace rforge;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "resnet_forge");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() /
              ("rforge_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
               std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string p(const std::string& rel) const { return (dir / rel).string(); }
    fs::path dir;
};

std::vector<std::string> synthetic_train(const std::string& out, const std::string& epochs) {
    return {"train", "--model", "baseline", "--synthetic", "--n", "64", "--classes", "4", "--image-size", "16",
            "--epochs", epochs, "--deterministic", "--out", out};
}

}  // namespace

TEST(Cli, HelpListsDefaults) {
    const auto r = cli({"train", "--help"});
    EXPECT_EQ(r.code, kExitOk);
    for (const char* s : {"--epochs INT [30]", "--batch-size INT [64]", "--seed UINT [42]", "--lr0 FLOAT [0.001]",
                          "--plateau-patience INT [3]", "--early-stop-patience INT [7]", "--config", "--synthetic",
                          "--data-dir", "RESNET_FORGE_DATA_DIR", "--skip,--no-skip"})
        EXPECT_NE(r.out.find(s), std::string::npos) << s;
    EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(cli({}).code, kExitUsage);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
    EXPECT_EQ(cli({"train", "--no-such-flag"}).code, kExitUsage);
    EXPECT_EQ(cli({"train", "--epochs", "many"}).code, kExitUsage);
    const auto r = cli({"train", "--model", "vgg16", "--synthetic"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("vgg16"), std::string::npos);
}

TEST(Cli, SummaryParameterCounts) {
    auto r = cli({"summary", "--model", "baseline"});
    EXPECT_EQ(r.code, kExitOk);
    EXPECT_NE(r.out.find("391,946 trainable"), std::string::npos);
    r = cli({"summary", "--model", "resnet18", "--skip"});
    EXPECT_NE(r.out.find("11,178,762 trainable"), std::string::npos);
    r = cli({"summary", "--model", "resnet18", "--no-skip"});
    EXPECT_NE(r.out.find("11,004,042 trainable"), std::string::npos);
    r = cli({"summary", "--model", "mini_resnet", "--csv"});
    EXPECT_EQ(r.out.rfind("layer,output_shape,trainable,non_trainable\n", 0), 0u);
    EXPECT_EQ(cli({"summary", "--model", "lenet"}).code, kExitUsage);
}

TEST(Cli, MissingDataIsUsageError) {
    ::unsetenv("RESNET_FORGE_DATA_DIR");
    const auto r = cli({"train", "--epochs", "1"});
    EXPECT_EQ(r.code, kExitUsage);
    EXPECT_NE(r.err.find("RESNET_FORGE_DATA_DIR"), std::string::npos);
}

TEST_F(CliDir, TrainOverfitsSyntheticFixture) {
    const auto r = cli(synthetic_train(p("run"), "50"));
    ASSERT_EQ(r.code, kExitOk) << r.err;
    // Four classes: 391,946 minus six fewer head columns of 256 weights + 1 bias.
    EXPECT_NE(r.out.find("390,404 trainable"), std::string::npos) << r.out;
    for (const char* f : {"history.csv", "best.ckpt", "config.txt"}) EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
    const auto h = History::load(dir / "run" / "history.csv");
    EXPECT_LE(h.size(), 50u);
    double best_acc = 0;
    for (const auto& rec : h.records()) best_acc = std::max(best_acc, rec.train_acc);
    EXPECT_EQ(best_acc, 1.0);
}

TEST_F(CliDir, SyntheticDefaultsAreFourClasses) {
    // Options of other subcommands (summary --classes defaults to 10) must not
    // leak into train's defaults.
    const auto r = cli({"train", "--model", "baseline", "--synthetic", "--epochs", "1", "--out", p("run")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("390,404 trainable"), std::string::npos) << r.out;
    EXPECT_NE(read_text_file(dir / "run" / "config.txt").find("classes=4\n"), std::string::npos);
}

TEST_F(CliDir, TrainIsDeterministic) {
    ASSERT_EQ(cli(synthetic_train(p("a"), "3")).code, kExitOk);
    ASSERT_EQ(cli(synthetic_train(p("b"), "3")).code, kExitOk);
    EXPECT_EQ(read_text_file(dir / "a" / "history.csv"), read_text_file(dir / "b" / "history.csv"));
    EXPECT_EQ(read_text_file(dir / "a" / "best.ckpt"), read_text_file(dir / "b" / "best.ckpt"));
}

TEST_F(CliDir, ConfigFilePrecedence) {
    write_text_file(dir / "c.txt",
                    "# comment line\n"
                    "model = baseline   # trailing comment\n"
                    "synthetic=true\n"
                    "image_size=16\n"
                    "epochs=2\n"
                    "deterministic=true\n");
    ASSERT_EQ(cli({"train", "--config", p("c.txt"), "--out", p("file")}).code, kExitOk);
    EXPECT_EQ(History::load(dir / "file" / "history.csv").size(), 2u);
    ASSERT_EQ(cli({"train", "--config", p("c.txt"), "--epochs", "1", "--out", p("flag")}).code, kExitOk);
    EXPECT_EQ(History::load(dir / "flag" / "history.csv").size(), 1u);
    const auto echo = read_text_file(dir / "flag" / "config.txt");
    EXPECT_NE(echo.find("epochs=1\n"), std::string::npos);
    EXPECT_NE(echo.find("model=baseline\n"), std::string::npos);

    write_text_file(dir / "bad.txt", "epochz=3\n");
    EXPECT_EQ(cli({"train", "--config", p("bad.txt")}).code, kExitUsage);
    EXPECT_EQ(cli({"train", "--config", p("missing.txt")}).code, kExitUsage);
}

TEST_F(CliDir, EvalMatchesHistoryAndWritesReports) {
    ASSERT_EQ(cli(synthetic_train(p("run"), "1")).code, kExitOk);
    const auto h = History::load(dir / "run" / "history.csv");
    const auto r = cli({"eval", "--checkpoint", p("run/best.ckpt"), "--config", p("run/config.txt"), "--split", "val"});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    char want[64];
    std::snprintf(want, sizeof want, "loss %.6f  accuracy %.6f", h.back().val_loss, h.back().val_acc);
    EXPECT_NE(r.out.find(want), std::string::npos) << r.out;

    const auto cm = read_text_file(dir / "run" / "confusion.csv");
    std::istringstream rows(cm);
    std::string line;
    int n_rows = 0;
    while (std::getline(rows, line)) {
        std::int64_t sum = 0;
        std::istringstream cells(line);
        std::string c;
        while (std::getline(cells, c, ',')) sum += std::stoll(c);
        EXPECT_EQ(sum, 4);  // 16 validation examples over 4 balanced classes
        ++n_rows;
    }
    EXPECT_EQ(n_rows, 4);
    EXPECT_EQ(read_text_file(dir / "run" / "report.csv").rfind("class,precision,recall,f1,support\n", 0), 0u);
}

TEST_F(CliDir, EvalMissingCheckpointIsIoFailure) {
    const auto r = cli({"eval", "--checkpoint", p("nope.ckpt"), "--synthetic"});
    EXPECT_EQ(r.code, kExitFailure);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(CliDir, GradflowOneRowPerLayerInOrder) {
    const auto r = cli({"gradflow", "--model", "mini_resnet", "--synthetic", "--out", p("gf")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto csv = read_text_file(dir / "gf" / "gradflow.csv");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "layer,depth,grad_l2");
    const auto layers = Model(build_mini_resnet(4)).parameter_layers();
    std::size_t i = 0;
    while (std::getline(in, line)) {
        ASSERT_LT(i, layers.size());
        EXPECT_EQ(line.substr(0, line.find(',')), layers[i].name);
        ++i;
    }
    EXPECT_EQ(i, layers.size());
}

TEST_F(CliDir, AblateWritesPairedHistoriesAndDelta) {
    const auto r = cli({"ablate", "--synthetic", "--n", "32", "--image-size", "8", "--epochs", "1", "--batch-size", "16",
                        "--deterministic", "--out", p("ab")});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const auto skip = History::load(dir / "ab/seed_42/skip/history.csv");
    const auto noskip = History::load(dir / "ab/seed_42/noskip/history.csv");
    const auto csv = read_text_file(dir / "ab/ablation.csv");
    std::istringstream in(csv);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::vector<std::string> cells;
    std::istringstream rs(row);
    for (std::string c; std::getline(rs, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 8u);
    EXPECT_EQ(std::stod(cells[1]), skip.back().train_loss);
    EXPECT_EQ(std::stod(cells[2]), noskip.back().train_loss);
    EXPECT_EQ(std::stod(cells[5]), skip.back().val_acc - noskip.back().val_acc);
}

TEST_F(CliDir, DataDirFromEnvironment) {
    write_synthetic_cifar_dir(dir / "cifar", 3);
    ::setenv("RESNET_FORGE_DATA_DIR", p("cifar").c_str(), 1);
    const auto r = cli({"train", "--model", "baseline", "--subset", "128", "--val-size", "64", "--epochs", "1",
                        "--out", p("run")});
    ::unsetenv("RESNET_FORGE_DATA_DIR");
    ASSERT_EQ(r.code, kExitOk) << r.err;
    EXPECT_NE(r.out.find("train 128, val 64, test 10000"), std::string::npos) << r.out;
}

TEST(Cli, SelftestPassesAndCatchesInjectedFault) {
    auto r = cli({"selftest", "--quick"});
    EXPECT_EQ(r.code, kExitOk) << r.out;
    for (const auto& name : gradient_check_names(false))
        EXPECT_NE(r.out.find(name), std::string::npos) << name;
    EXPECT_NE(r.out.find("max_rel_error"), std::string::npos);
    r = cli({"selftest", "--quick", "--inject-fault", "conv2d"});
    EXPECT_EQ(r.code, kExitFailure);
    EXPECT_NE(r.out.find("FAIL"), std::string::npos);
    // The hook is cleared on exit.
    EXPECT_EQ(cli({"selftest", "--quick"}).code, kExitOk);
    EXPECT_EQ(cli({"selftest", "--inject-fault", "nonsense"}).code, kExitUsage);
}
