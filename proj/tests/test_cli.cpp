#include "test_util.hpp"

#include "ppcm/cli.hpp"
#include "ppcm/keystream.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ppcm;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result ppcm_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ppcm");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ppcm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, ParamsDefaults) {
    auto r = ppcm_cli({"params"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "5345306\n");
    r = ppcm_cli({"params", "--mode", "convmixer_plain"});
    EXPECT_EQ(r.out, "5306890\n");
    r = ppcm_cli({"params", "--mode", "ele_same", "--image-size", "32", "--block", "4", "--classifier", "0"});
    EXPECT_EQ(r.out, "823296\n");
    EXPECT_TRUE(r.err.empty());
    r = ppcm_cli({"params", "--mode", "ele_same", "--image-size", "32", "--block", "4"});
    EXPECT_EQ(r.out, "29313296\n");
    EXPECT_NE(r.err.find("approximate"), std::string::npos);
}

TEST_F(Cli, ParamsErrors) {
    EXPECT_EQ(ppcm_cli({"params", "--image-size", "30"}).code, cli::invalid_argument);
    EXPECT_EQ(ppcm_cli({"params", "--mode", "bogus"}).code, cli::usage_error);
    EXPECT_EQ(ppcm_cli({}).code, cli::usage_error);
    EXPECT_EQ(ppcm_cli({"frobnicate"}).code, cli::usage_error);
}

TEST_F(Cli, Sweep) {
    auto r = ppcm_cli({"sweep", "--sizes", "32,64"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "image_size,policy,params");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 6);
    EXPECT_EQ(ppcm_cli({"sweep", "--sizes", "32,,64"}).code, cli::invalid_argument);
    r = ppcm_cli({"sweep", "--out", path("s.csv")});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(slurp(path("s.csv")).substr(0, 24), "image_size,policy,params");
}

TEST_F(Cli, KeygenDeterministicWithSeed) {
    ASSERT_EQ(ppcm_cli({"keygen", "--out", path("a.key"), "--seed", "0", "--block", "4"}).code, 0);
    ASSERT_EQ(ppcm_cli({"keygen", "--out", path("b.key"), "--seed", "0x0", "--block", "4"}).code, 0);
    EXPECT_EQ(slurp(path("a.key")), slurp(path("b.key")));
    const auto k = read_key_file(path("a.key"));
    EXPECT_EQ(k.block_size, 4);
    EXPECT_EQ(k.master, master_from_seed(0));
    ASSERT_EQ(ppcm_cli({"keygen", "--out", path("c.key")}).code, 0);
    ASSERT_EQ(ppcm_cli({"keygen", "--out", path("d.key")}).code, 0);
    EXPECT_NE(slurp(path("c.key")), slurp(path("d.key")));
    EXPECT_EQ(ppcm_cli({"keygen", "--out", path("e.key"), "--seed", "xyz"}).code, cli::parse_error);
}

TEST_F(Cli, EncryptDecryptRoundTrip) {
    test::Rng rng(21);
    std::vector<LabeledImage> imgs;
    for (int i = 0; i < 5; ++i) imgs.push_back({test::random_image(rng, 16, 16), i % 3});
    save_image_dir(path("plain"), imgs);
    ASSERT_EQ(ppcm_cli({"keygen", "--out", path("k.key"), "--seed", "abc", "--block", "4"}).code, 0);
    auto r = ppcm_cli({"encrypt", "--key", path("k.key"), "--block", "4", "--in", path("plain"), "--out", path("enc")});
    ASSERT_EQ(r.code, 0) << r.err;
    r = ppcm_cli({"decrypt", "--key", path("k.key"), "--in", path("enc"), "--out", path("dec")});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const auto& e : fs::directory_iterator(path("plain"))) {
        const auto name = e.path().filename();
        EXPECT_EQ(slurp(e.path()), slurp(fs::path(path("dec")) / name)) << name;
        if (name.extension() == ".ppm") EXPECT_NE(slurp(e.path()), slurp(fs::path(path("enc")) / name));
    }
}

TEST_F(Cli, EncryptErrors) {
    test::Rng rng(22);
    save_image_dir(path("plain"), std::vector<LabeledImage>{{test::random_image(rng, 10, 10), 0}});
    ASSERT_EQ(ppcm_cli({"keygen", "--out", path("k.key"), "--seed", "1", "--block", "4"}).code, 0);
    EXPECT_EQ(ppcm_cli({"encrypt", "--key", path("k.key"), "--block", "8", "--in", path("plain"), "--out", path("o")}).code,
              cli::key_mismatch);
    // 10 is not a multiple of 4
    EXPECT_EQ(ppcm_cli({"encrypt", "--key", path("k.key"), "--in", path("plain"), "--out", path("o")}).code,
              cli::invalid_argument);
    EXPECT_EQ(ppcm_cli({"encrypt", "--key", path("missing.key"), "--in", path("plain"), "--out", path("o")}).code,
              cli::io_error);
    {
        std::ofstream bad(path("bad.key"));
        bad << "master=zz\nblock_size=4\nversion=1\n";
    }
    EXPECT_EQ(ppcm_cli({"encrypt", "--key", path("bad.key"), "--in", path("plain"), "--out", path("o")}).code,
              cli::parse_error);
    EXPECT_EQ(ppcm_cli({"encrypt", "--key", path("k.key"), "--in", path("nowhere"), "--out", path("o")}).code,
              cli::io_error);
    EXPECT_EQ(ppcm_cli({"encrypt", "--key", path("k.key"), "--in", path("plain")}).code, cli::usage_error);
}

TEST_F(Cli, TrainAndEvalTinyRun) {
    save_image_dir(path("train"), test::synthetic_images(48, 8, 10, 2, 20, 31));
    save_image_dir(path("test"), test::synthetic_images(16, 8, 10, 2, 20, 31, 1));
    {
        std::ofstream cfg(path("run.cfg"));
        cfg << "h=8\nd=1\nk=3\nM=2\nimage_size=8\nn_classes=10\nepochs=2\nbatch_size=16\nlr=0.003\nseed=5\n"
               "use_adaptive_matrix=1\nencryption=on\n";
    }
    ASSERT_EQ(ppcm_cli({"keygen", "--out", path("k.key"), "--seed", "7", "--block", "2"}).code, 0);
    auto r = ppcm_cli({"train", "--config", path("run.cfg"), "--data", path("train"), "--test", path("test"), "--out",
                       path("run"), "--key", path("k.key")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(path("run/model.ckpt")));
    std::istringstream csv(slurp(path("run/metrics.csv")));
    std::string line;
    int lines = 0;
    while (std::getline(csv, line)) ++lines;
    EXPECT_EQ(lines, 3);

    r = ppcm_cli({"eval", "--ckpt", path("run/model.ckpt"), "--data", path("test"), "--key", path("k.key"),
                  "--encryption", "on"});
    ASSERT_EQ(r.code, 0) << r.err;
    const double acc = std::stod(r.out);
    EXPECT_GE(acc, 0.0);
    EXPECT_LE(acc, 1.0);

    // encryption requested without a key
    EXPECT_EQ(ppcm_cli({"train", "--config", path("run.cfg"), "--data", path("train"), "--out", path("run2")}).code,
              cli::invalid_argument);
    EXPECT_EQ(ppcm_cli({"eval", "--ckpt", path("nope.ckpt"), "--data", path("test")}).code, cli::io_error);
}
