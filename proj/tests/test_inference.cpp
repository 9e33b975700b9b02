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

#include <random>
#include <set>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "etsam/inference.hpp"

namespace etsam {
namespace {

ModelConfig tiny() {
  ModelConfig c = ModelConfig::toy();
  c.input_size = 64;
  c.embed_dim = 32;
  c.encoder_depth = 1;
  c.decoder_depth = 1;
  c.encoder_heads = 2;
  c.decoder_heads = 2;
  c.encoder_mlp_dim = 64;
  c.decoder_mlp_dim = 64;
  c.upscale_dim = 16;
  c.mask_dim = 8;
  c.hr_dim = 4;
  c.iou_hidden = 16;
  c.adapter_dim = 8;
  c.decode_chunk = 8;
  return c;
}

cv::Mat noise_image(int w, int h, int seed) {
  cv::Mat img(h, w, CV_32FC3);
  cv::theRNG().state = seed;
  cv::randu(img, 0.0f, 1.0f);
  return img;
}

class InferenceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    torch::manual_seed(1);
    model_ = EtSam(tiny());
    model_->eval();
  }
  EtSam model_{nullptr};
};

std::vector<Point> random_points(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 64);
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
  return pts;
}

TEST_F(InferenceTest, RunPointsPartitionInvariance) {
  const EncodedImage img = encode(model_, noise_image(64, 64, 3), Task::kMulti);
  const auto pts = random_points(250, 4);
  const PointOutputs a = run_points(model_, img.embedding, pts, Task::kMulti, 100);
  EXPECT_EQ(a.batches, 3);
  EXPECT_EQ(a.size(), 250);
  for (int bs : {1, 7, 250}) {
    const PointOutputs b = run_points(model_, img.embedding, pts, Task::kMulti, bs);
    for (auto g : {Granularity::kWord, Granularity::kWordGroup, Granularity::kLine,
                   Granularity::kParagraph}) {
      EXPECT_LT((a.logits(g) - b.logits(g)).abs().max().item<double>(), 1e-5) << bs;
    }
    EXPECT_LT((a.iou - b.iou).abs().max().item<double>(), 1e-5);
  }
  EXPECT_THROW(run_points(model_, img.embedding, pts, Task::kMulti, 0), std::invalid_argument);
}

TEST_F(InferenceTest, ZeroPoints) {
  const EncodedImage img = encode(model_, noise_image(64, 64, 5), Task::kWord);
  const PointOutputs o = run_points(model_, img.embedding, {}, Task::kWord);
  EXPECT_EQ(o.size(), 0);
  EXPECT_EQ(o.batches, 0);
  EXPECT_EQ(o.word_logits.size(1), 24);
  EXPECT_EQ(o.line_logits.size(1), 16);
}

TEST_F(InferenceTest, NoPeaksGivesEmptyDetections) {
  cv::Mat blank(64, 64, CV_32FC3, cv::Scalar(1, 1, 1));
  EncodedImage img = encode(model_, blank, Task::kMulti);
  img.heatmap = Grid<double>(16, 16);
  const auto r = detect(model_, img, Task::kMulti, InferenceConfig{});
  EXPECT_TRUE(r.peaks.empty());
  EXPECT_EQ(r.detections.total(), 0u);
  EXPECT_EQ(r.detections.num_clusters, 0);
}

TEST_F(InferenceTest, EncodeLetterboxesAndRejectsBadInput) {
  const EncodedImage img = encode(model_, noise_image(128, 64, 6), Task::kMulti);
  EXPECT_EQ(img.width, 128);
  EXPECT_EQ(img.height, 64);
  EXPECT_DOUBLE_EQ(img.scale, 0.5);
  EXPECT_EQ(img.heatmap.rows(), 16);
  for (double v : img.heatmap.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(encode(model_, cv::Mat(), Task::kMulti), InferenceError);
  {
    torch::NoGradGuard g;
    model_->point_decoder->output_token.fill_(NAN);
  }
  EXPECT_THROW(encode(model_, noise_image(64, 64, 1), Task::kMulti), InferenceError);
}

Grid<double> random_heat(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Grid<double> g(16, 16);
  for (auto& v : g.values()) v = u(rng);
  return g;
}

TEST_F(InferenceTest, CascadeConsistency) {
  EncodedImage img = encode(model_, noise_image(96, 64, 7), Task::kMulti);
  img.heatmap = random_heat(8);
  InferenceConfig cfg;
  cfg.point_threshold = 0.5;
  cfg.iou_threshold = 0.01;  // an untrained IoU head sits near 0.5
  const auto r = detect(model_, img, Task::kMulti, cfg);
  const auto& ds = r.detections;
  ASSERT_FALSE(r.peaks.empty());
  std::set<int> line_points;
  for (const auto& l : ds.lines) {
    line_points.insert(l.source_point);
    EXPECT_GE(l.cluster, 0);
    EXPECT_LT(l.cluster, ds.num_clusters);
    EXPECT_EQ(l.mask.rows(), 64);
    EXPECT_EQ(l.mask.cols(), 96);
  }
  for (const auto* set : {&ds.word_groups, &ds.paragraphs}) {
    for (const auto& d : *set) EXPECT_TRUE(line_points.count(d.source_point));
  }
  for (const auto& w : ds.words) {
    EXPECT_LT(w.source_point, static_cast<int>(r.peaks.size()));
    if (!ds.lines.empty()) EXPECT_GE(w.cluster, 0);
  }
  EXPECT_LE(ds.lines.size(), r.peaks.size());
}

TEST_F(InferenceTest, SingleLevelTasks) {
  EncodedImage img = encode(model_, noise_image(64, 64, 9), Task::kWord);
  img.heatmap = random_heat(10);
  InferenceConfig cfg;
  cfg.iou_threshold = 0.01;
  const auto w = detect(model_, img, Task::kWord, cfg);
  EXPECT_TRUE(w.detections.lines.empty());
  EXPECT_TRUE(w.detections.paragraphs.empty());
  const auto l = detect(model_, img, Task::kLine, cfg);
  EXPECT_TRUE(l.detections.words.empty());
  EXPECT_TRUE(l.detections.word_groups.empty());
}

TEST_F(InferenceTest, HigherThresholdNeverAddsPoints) {
  EncodedImage img = encode(model_, noise_image(64, 64, 11), Task::kMulti);
  img.heatmap = random_heat(12);
  InferenceConfig cfg;
  cfg.iou_threshold = 0.01;
  std::size_t prev_points = SIZE_MAX, prev_words = SIZE_MAX;
  for (double t : {0.5, 0.6, 0.7, 0.8}) {
    cfg.point_threshold = t;
    const auto r = detect(model_, img, Task::kMulti, cfg);
    EXPECT_LE(r.peaks.size(), prev_points);
    EXPECT_LE(r.detections.words.size(), prev_words);
    prev_points = r.peaks.size();
    prev_words = r.detections.words.size();
  }
}

}  // namespace
}  // namespace etsam
