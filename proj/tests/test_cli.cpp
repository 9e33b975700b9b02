// Copyright 2026 The etsam Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <opencv2/imgcodecs.hpp>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "etsam_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "spec.cfg") << "version = 1\nseed = 5\nmulti = 2\nword_only = 1\n"
                                        "line_only = 1\nwidth = 128\nheight = 96\n";
    std::ofstream(dir_ / "train.cfg")
        << "version = 1\nseed = 1\nmodel.preset = toy\ntrain.steps = 2\ntrain.augment = false\n"
           "data.multi = data/multi.json\ndata.word = data/word.json\n"
           "data.line = data/line.json\n";
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static int run(const std::string& args) {
    const std::string cmd = std::string(ETSAM_CLI_PATH) + " " + args + " > " +
                            (dir_ / "last.log").string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }
  static std::string last_log() {
    std::ifstream in(dir_ / "last.log");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  static std::string p(const std::string& rel) { return (dir_ / rel).string(); }

  static fs::path dir_;
};
fs::path CliTest::dir_;

TEST_F(CliTest, EndToEnd) {
  ASSERT_EQ(run("make-data --spec " + p("spec.cfg") + " --out " + p("data")), 0) << last_log();
  EXPECT_TRUE(fs::exists(dir_ / "data/manifest.json"));
  const json multi = json::parse(std::ifstream(dir_ / "data/multi.json"));
  ASSERT_EQ(multi["annotations"].size(), 2u);
  const std::string first = multi["annotations"][0]["image_id"];
  EXPECT_TRUE(fs::exists(dir_ / "data/images" / (first + ".png")));

  ASSERT_EQ(run("train --config " + p("train.cfg") + " --out " + p("run")), 0) << last_log();
  EXPECT_TRUE(fs::exists(dir_ / "run/checkpoint.etck"));
  std::ifstream log(dir_ / "run/train_log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    EXPECT_TRUE(json::parse(line).contains("L_total"));
    ++lines;
  }
  EXPECT_EQ(lines, 2);

  ASSERT_EQ(run("infer --checkpoint " + p("run/checkpoint.etck") + " --images " +
                p("data/images") + " --out " + p("pred") + " --save-heatmap --overlay"),
            0)
      << last_log();
  EXPECT_TRUE(fs::exists(dir_ / "pred/predictions" / (first + ".json")));
  const cv::Mat heat = cv::imread(p("pred/heatmaps/" + first + ".png"), cv::IMREAD_UNCHANGED);
  ASSERT_FALSE(heat.empty());
  EXPECT_EQ(heat.rows, 64);  // S/4 for the toy preset
  EXPECT_TRUE(fs::exists(dir_ / "pred/overlays" / (first + ".png")));

  ASSERT_EQ(run("eval --pred " + p("pred/predictions") + " --gt " + p("data/multi.json") +
                " --out " + p("eval")),
            0)
      << last_log();
  const json report = json::parse(std::ifstream(dir_ / "eval/report.json"));
  EXPECT_FALSE(report.empty());

  ASSERT_EQ(run("ablate --checkpoint " + p("run/checkpoint.etck") + " --gt " +
                p("data/multi.json") + " --images " + p("data/images") + " --out " + p("abl")),
            0)
      << last_log();
  const json abl = json::parse(std::ifstream(dir_ / "abl/ablation.json"));
  EXPECT_EQ(abl["rows"].size(), 4u);
  EXPECT_TRUE(abl["points_monotone"].get<bool>());
}

TEST_F(CliTest, NoCandidatePointsWritesEmptyFile) {
  if (!fs::exists(dir_ / "run/checkpoint.etck")) GTEST_SKIP() << "needs EndToEnd";
  fs::create_directories(dir_ / "blank");
  cv::imwrite(p("blank/white.png"), cv::Mat(96, 128, CV_8UC3, cv::Scalar(255, 255, 255)));
  // A threshold above every heatmap value leaves no candidate points.
  ASSERT_EQ(run("infer --checkpoint " + p("run/checkpoint.etck") + " --images " +
                p("blank/white.png") + " --threshold 0.999999 --out " + p("blank_out")),
            0)
      << last_log();
  const json pred = json::parse(std::ifstream(dir_ / "blank_out/predictions/white.json"));
  EXPECT_EQ(pred["image_id"], "white");
  EXPECT_TRUE(pred["detections"].empty());
}

TEST_F(CliTest, ErrorsExitNonZero) {
  EXPECT_NE(run("train --config " + p("missing.cfg")), 0);
  EXPECT_NE(last_log().find("error"), std::string::npos);
  EXPECT_NE(run("eval --pred " + p("nope") + " --gt " + p("data/multi.json") + " --out " +
                p("x")),
            0);
  EXPECT_NE(run("infer --checkpoint " + p("missing.etck") + " --images " + p("data") +
                " --out " + p("y")),
            0);
  EXPECT_NE(run("frobnicate"), 0);
}

}  // namespace
