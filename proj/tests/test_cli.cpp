#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int capd(const std::string& args, const std::string& log = "") {
  std::string cmd = std::string(CAPD_CLI_PATH) + " " + args;
  cmd += log.empty() ? " >/dev/null 2>&1" : " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("capd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string data_args() const {
    const auto d = dir_ / "data";
    return "--features " + (d / "features.csv").string() + " --embeddings " + (d / "embeddings.csv").string() +
           " --split " + (d / "split.txt").string();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SynthWritesThreeFiles) {
  ASSERT_EQ(capd("synth --preset tiny --out " + (dir_ / "data").string()), 0);
  EXPECT_TRUE(fs::exists(dir_ / "data" / "features.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "data" / "embeddings.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "data" / "split.txt"));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(capd(""), 2);
  EXPECT_EQ(capd("synth --bogus 1 --out " + dir_.string()), 2);
  EXPECT_EQ(capd("frobnicate"), 2);
  EXPECT_EQ(capd("--help"), 0);
}

TEST_F(Cli, ValidationErrorsExitThree) {
  ASSERT_EQ(capd("synth --preset tiny --out " + (dir_ / "data").string()), 0);
  const auto log = (dir_ / "err.txt").string();
  EXPECT_EQ(capd("predict " + data_args() + " --model " + (dir_ / "missing.bin").string() + " --out " + dir_.string(), log), 3);
  EXPECT_NE(slurp(log).find("capd: error kind=validation message="), std::string::npos);
  EXPECT_EQ(capd("synth --preset enormous --out " + dir_.string()), 3);
}

TEST_F(Cli, TrainPredictEvalReproducible) {
  ASSERT_EQ(capd("synth --preset tiny --seed 5 --out " + (dir_ / "data").string()), 0);
  const std::string fixed = " --lambda-s 1e-3 --lambda-u 1e-2 --iters 50";
  for (const std::string run : {"a", "b"}) {
    const auto model = (dir_ / run / "model.bin").string();
    ASSERT_EQ(capd("train " + data_args() + " --model " + model + fixed + (run == "b" ? " --threads 3" : "")), 0);
    ASSERT_EQ(capd("predict " + data_args() + " --model " + model + " --out " + (dir_ / run).string()), 0);
    const auto out = (dir_ / run / "stdout.txt").string();
    ASSERT_EQ(capd("eval " + data_args() + " --out " + (dir_ / run).string(), out), 0);
    EXPECT_EQ(slurp(out).rfind("top1 = ", 0), 0u);
    EXPECT_TRUE(fs::exists(dir_ / run / "report.txt"));
  }
  EXPECT_EQ(slurp(dir_ / "a" / "predictions.csv"), slurp(dir_ / "b" / "predictions.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "model.bin"), slurp(dir_ / "b" / "model.bin"));
}

TEST_F(Cli, GzslEvalPrintsHarmonicMean) {
  ASSERT_EQ(capd("synth --preset tiny --mode gzsl --out " + (dir_ / "data").string()), 0);
  const auto model = (dir_ / "model.bin").string();
  ASSERT_EQ(capd("train " + data_args() + " --model " + model + " --lambda-s 1e-3 --lambda-u 1e-2 --lambda-gamma 1e-3 --iters 30"), 0);
  ASSERT_EQ(capd("predict " + data_args() + " --model " + model + " --out " + dir_.string()), 0);
  const auto out = (dir_ / "stdout.txt").string();
  ASSERT_EQ(capd("eval " + data_args() + " --out " + dir_.string(), out), 0);
  EXPECT_NE(slurp(out).find("hm = "), std::string::npos);
}
