/*
 * Copyright 2026 The bevloc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "bevloc/commands.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"

namespace bevloc {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bevloc_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    Write("small.cfg",
          "world.length = 60\n"
          "world.width = 30\n"
          "trajectory.steps = 6\n"
          "noise.odom_sigma_x = 0.02\n"
          "noise.intensity_sigma = 0.05\n"
          "localize.online_rows = 120\n"
          "localize.online_cols = 160\n");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string Path(const std::string& name) const { return (dir_ / name).string(); }
  void Write(const std::string& name, const std::string& text) {
    std::ofstream(Path(name)) << text;
  }
  std::string Read(const std::string& name) const {
    std::ifstream in(Path(name), std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }
  int Run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return RunCli(args, out_, err_);
  }
  void Simulate(const std::string& tag, const std::string& seed = "3") {
    ASSERT_EQ(Run({"simulate", "--config", Path("small.cfg"), "--map", Path(tag + ".bvg"),
                   "--drive", Path(tag + ".bvd"), "--seed", seed}),
              0)
        << err_.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, SimulateIsDeterministic) {
  Simulate("a");
  Simulate("b");
  EXPECT_EQ(Read("a.bvd"), Read("b.bvd"));
  EXPECT_EQ(Read("a.bvg"), Read("b.bvg"));
  EXPECT_NE(out_.str().find("7 steps"), std::string::npos);
  Simulate("c", "4");
  EXPECT_NE(Read("a.bvd"), Read("c.bvd"));
}

TEST_F(CliTest, SimulateRejectsZeroStepsAndUnknownKeys) {
  EXPECT_NE(Run({"simulate", "--map", Path("m.bvg"), "--drive", Path("d.bvd"), "--steps", "0"}), 0);
  EXPECT_FALSE(fs::exists(Path("m.bvg")));
  Write("typo.cfg", "world.lenght = 60\n");
  EXPECT_NE(Run({"simulate", "--config", Path("typo.cfg"), "--map", Path("m.bvg"),
                 "--drive", Path("d.bvd")}),
            0);
  EXPECT_NE(err_.str().find("world.lenght"), std::string::npos);
}

TEST_F(CliTest, LocalizeRawAndEval) {
  Simulate("a");
  ASSERT_EQ(Run({"localize", "--config", Path("small.cfg"), "--map", Path("a.bvg"),
                 "--drive", Path("a.bvd"), "--raw", "--out", Path("t.csv"), "--report",
                 Path("r.csv"), "--curve", Path("c.csv"), "--hard-argmax", "--no-gps"}),
            0)
      << err_.str();
  EXPECT_TRUE(fs::exists(Path("r.csv")));
  EXPECT_TRUE(fs::exists(Path("c.csv")));
  ASSERT_EQ(Run({"eval", Path("t.csv"), "--cumulative", Path("cum.csv"),
                 "--failure-threshold", "0.5"}),
            0)
      << err_.str();
  EXPECT_NE(out_.str().find("all,7,"), std::string::npos);
  EXPECT_EQ(Read("cum.csv").substr(0, 17), "error_cm,fraction");
}

TEST_F(CliTest, LocalizeFailuresLeaveNoOutputs) {
  Simulate("a");
  EXPECT_NE(Run({"localize", "--map", Path("missing.bvg"), "--drive", Path("a.bvd"),
                 "--raw", "--out", Path("t.csv")}),
            0);
  EXPECT_NE(err_.str().find("missing.bvg"), std::string::npos);
  EXPECT_FALSE(fs::exists(Path("t.csv")));
  EXPECT_NE(Run({"localize", "--map", Path("a.bvg"), "--drive", Path("a.bvd"), "--out",
                 Path("t.csv")}),
            0);
  Write("bad.csv", "nonsense\n");
  EXPECT_NE(Run({"eval", Path("bad.csv")}), 0);
}

TEST_F(CliTest, TrainSmokeRunIsDeterministic) {
  Simulate("a");
  auto train = [&](const std::string& out, const std::string& fraction) {
    return Run({"train", "--config", Path("small.cfg"), "--map", Path("a.bvg"), "--drive",
                Path("a.bvd"), "--out", Path(out), "--metrics", Path(out + ".csv"),
                "--epochs", "1", "--width", "4", "--data-fraction", fraction, "--seed", "5"});
  };
  ASSERT_EQ(train("a.fcn", "1.0"), 0) << err_.str();
  ASSERT_EQ(train("b.fcn", "1.0"), 0) << err_.str();
  EXPECT_EQ(Read("a.fcn"), Read("b.fcn"));
  EXPECT_EQ(Read("a.fcn.csv").substr(0, 24), "epoch,mean_loss,top1_acc");
  for (const char* f : {"0.25", "0.05", "0.01"}) EXPECT_EQ(train("c.fcn", f), 0) << err_.str();
  EXPECT_NE(train("d.fcn", "0"), 0);

  ASSERT_EQ(Run({"localize", "--config", Path("small.cfg"), "--map", Path("a.bvg"),
                 "--drive", Path("a.bvd"), "--checkpoint", Path("a.fcn"), "--out",
                 Path("t.csv")}),
            0)
      << err_.str();
}

TEST_F(CliTest, BenchWritesCsvAndRejectsZeroReps) {
  ASSERT_EQ(Run({"bench", "--channels", "1,2", "--reps", "2", "--warmup", "0", "--rows",
                 "48", "--cols", "64", "--out", Path("bench.csv")}),
            0)
      << err_.str();
  const std::string csv = Read("bench.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,channels,kernel,median_ms,mean_ms,min_ms");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(Run({"bench", "--reps", "0"}), 0);
  EXPECT_NE(Run({"frobnicate"}), 0);
}

}  // namespace
}  // namespace bevloc
