// Copyright (C) 2026 The rlvrsim Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "json.hpp"
#include "support.h"

namespace rlvrsim {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rlvrsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Out(const std::string& sub) const { return "\"" + (dir_ / sub).string() + "\""; }

  static std::string Slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream b;
    b << in.rdbuf();
    return b.str();
  }

  fs::path dir_;
};

constexpr const char* kSynth = "--synth long_tail --synth-steps 6 --synth-per-step 64";

TEST_F(Cli, AnalyzeWritesReport) {
  const auto r = testing::RunCli("--out " + Out("a") + " analyze " + kSynth);
  ASSERT_EQ(r.exit_code, 0) << r.output;
  for (const char* f : {"summary.json", "cdf.csv", "similarity.csv", "trends.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  }
}

TEST_F(Cli, MissingTraceIsDataError) {
  const auto r = testing::RunCli("--out " + Out("a") + " analyze --trace /nonexistent/trace.csv");
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("/nonexistent/trace.csv"), std::string::npos) << r.output;
}

TEST_F(Cli, MalformedTraceNamesLine) {
  {
    std::ofstream f(dir_ / "bad.csv");
    f << "step,input_len,output_len,type\n0,10,20,mathematics\n0,10,-4,mathematics\n";
  }
  const auto r = testing::RunCli("analyze --trace " + Out("bad.csv"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("line 3"), std::string::npos) << r.output;
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(testing::RunCli("simulate --bogus-flag").exit_code, 1);
  EXPECT_EQ(testing::RunCli("").exit_code, 1);
  EXPECT_EQ(testing::RunCli("--format xml simulate").exit_code, 1);
  EXPECT_EQ(testing::RunCli("sweep " + std::string(kSynth) + " --axis staleness").exit_code, 1);
  EXPECT_EQ(testing::RunCli("--help").exit_code, 0);
}

TEST_F(Cli, SimulateIsByteIdentical) {
  const std::string args = std::string(" simulate ") + kSynth + " --mode async --staleness 2 --train-ranks 2 --rollout-ranks 2";
  ASSERT_EQ(testing::RunCli("--seed 5 --out " + Out("x") + args).exit_code, 0);
  ASSERT_EQ(testing::RunCli("--seed 5 --out " + Out("y") + args).exit_code, 0);
  for (const char* f : {"run.json", "timeline.json", "timeline.csv", "steps.csv"}) {
    EXPECT_EQ(Slurp(dir_ / "x" / f), Slurp(dir_ / "y" / f)) << f;
    EXPECT_FALSE(Slurp(dir_ / "x" / f).empty()) << f;
  }
}

TEST_F(Cli, StalenessShortensRun) {
  const std::string base = std::string(" simulate ") + kSynth + " --mode async";
  ASSERT_EQ(testing::RunCli("--out " + Out("s0") + base + " --staleness 0").exit_code, 0);
  ASSERT_EQ(testing::RunCli("--out " + Out("s8") + base + " --staleness 8").exit_code, 0);
  const auto a = nlohmann::json::parse(Slurp(dir_ / "s0" / "run.json"));
  const auto b = nlohmann::json::parse(Slurp(dir_ / "s8" / "run.json"));
  EXPECT_LE(b["e2e_time"].get<double>(), a["e2e_time"].get<double>());
}

TEST_F(Cli, SampleDeterministicUnderSeed) {
  const std::string args = std::string(" sample ") + kSynth + " --bsz 4 --g 4 --steps 3";
  ASSERT_EQ(testing::RunCli("--seed 9 --out " + Out("x") + args).exit_code, 0);
  ASSERT_EQ(testing::RunCli("--seed 9 --out " + Out("y") + args).exit_code, 0);
  ASSERT_EQ(testing::RunCli("--seed 10 --out " + Out("z") + args).exit_code, 0);
  const std::string x = Slurp(dir_ / "x" / "workload.csv");
  EXPECT_FALSE(x.empty());
  EXPECT_EQ(x, Slurp(dir_ / "y" / "workload.csv"));
  EXPECT_NE(x, Slurp(dir_ / "z" / "workload.csv"));
}

TEST_F(Cli, SweepWritesOneRowPerValue) {
  const auto r = testing::RunCli("--out " + Out("w") + " sweep " + kSynth +
                                 " --mode async --axis staleness --values 0,2,4");
  ASSERT_EQ(r.exit_code, 0) << r.output;
  const std::string csv = Slurp(dir_ / "w" / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(csv.rfind("staleness,", 0), 0u);
}

TEST_F(Cli, SweepFailureExitsThree) {
  const auto r = testing::RunCli("--out " + Out("w") + " sweep " + kSynth + " --mode split --axis gpus --values 4,1");
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_TRUE(fs::exists(dir_ / "w" / "sweep.csv"));
}

TEST_F(Cli, ConfigPrecedence) {
  {
    std::ofstream f(dir_ / "cfg.json");
    f << R"({"run": {"mode": "async", "max_staleness": 1}, "cost": {"t_weight_sync": 0}})";
  }
  const std::string base = "--config " + Out("cfg.json") + " --out " + Out("c") + " simulate " + kSynth;
  ASSERT_EQ(testing::RunCli(base).exit_code, 0);
  auto j = nlohmann::json::parse(Slurp(dir_ / "c" / "run.json"));
  EXPECT_EQ(j["config"]["run"]["max_staleness"], 1);
  EXPECT_EQ(j["config"]["run"]["mode"], "async_split");
  ASSERT_EQ(testing::RunCli(base + " --staleness 3").exit_code, 0);
  j = nlohmann::json::parse(Slurp(dir_ / "c" / "run.json"));
  EXPECT_EQ(j["config"]["run"]["max_staleness"], 3);
  EXPECT_EQ(j["config"]["cost"]["t_weight_sync"], 0);
}

TEST_F(Cli, BadConfigIsUsageError) {
  {
    std::ofstream f(dir_ / "cfg.json");
    f << R"({"cost": {"t_warp": 1}})";
  }
  const auto r = testing::RunCli("--config " + Out("cfg.json") + " simulate " + kSynth);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("t_warp"), std::string::npos);
}

TEST_F(Cli, SimulationErrorExitsThree) {
  const auto r = testing::RunCli("--out " + Out("e") + " simulate " + std::string(kSynth) + " --kv-capacity 10");
  EXPECT_EQ(r.exit_code, 3) << r.output;
}

TEST_F(Cli, ValidateAndJsonFormat) {
  const auto v = testing::RunCli("validate " + std::string(kSynth));
  EXPECT_EQ(v.exit_code, 0) << v.output;
  ASSERT_EQ(testing::RunCli("--format json --out " + Out("j") + " simulate " + kSynth).exit_code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "j" / "steps.json"));
  const auto steps = nlohmann::json::parse(Slurp(dir_ / "j" / "steps.json"), nullptr, false);
  EXPECT_FALSE(steps.is_discarded());
}

}  // namespace
}  // namespace rlvrsim
