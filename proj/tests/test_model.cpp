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

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "etsam/model.hpp"

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
  c.decode_chunk = 2;
  return c;
}

class ModelTest : public ::testing::Test {
 protected:
  void SetUp() override {
    torch::manual_seed(0);
    model_ = EtSam(tiny());
    model_->eval();
    image_ = torch::rand({1, 3, 64, 64});
  }
  EtSam model_{nullptr};
  torch::Tensor image_;
};

TEST(ModelConfigTest, GridsAndValidation) {
  ModelConfig c;
  EXPECT_EQ(c.embed_grid(), 64);
  EXPECT_EQ(c.heatmap_grid(), 256);
  EXPECT_EQ(c.highres_grid(), 384);
  const ModelConfig t = ModelConfig::toy();
  EXPECT_EQ(t.input_size, 256);
  EXPECT_EQ(t.embed_grid(), 16);
  EXPECT_EQ(t.highres_grid(), 96);
  c.input_size = 1000;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  const ModelConfig r = ModelConfig::from_json(t.to_json());
  EXPECT_EQ(r.to_json(), t.to_json());
}

TEST_F(ModelTest, EncoderShapesAndDeterminism) {
  torch::NoGradGuard g;
  const auto e1 = model_->encode_image(image_);
  EXPECT_EQ(e1.sizes(), (std::vector<std::int64_t>{1, 32, 4, 4}));
  EXPECT_TRUE(torch::equal(e1, model_->encode_image(image_.clone())));
  EXPECT_TRUE(torch::isfinite(e1).all().item<bool>());
  EXPECT_THROW(model_->encode_image(torch::rand({1, 3, 32, 32})), std::invalid_argument);
}

TEST_F(ModelTest, PointDecoderShapesAndTaskModulation) {
  torch::NoGradGuard g;
  const auto emb = model_->encode_image(image_);
  const auto o0 = model_->point_decode(emb, 0);
  EXPECT_EQ(o0.heatmap.sizes(), (std::vector<std::int64_t>{1, 16, 16}));
  EXPECT_EQ(o0.features.sizes(), (std::vector<std::int64_t>{1, 16, 16, 8}));
  EXPECT_GE(o0.heatmap.min().item<double>(), 0.0);
  EXPECT_LE(o0.heatmap.max().item<double>(), 1.0);
  const auto o1 = model_->point_decode(emb, 1);
  EXPECT_GT((o0.heatmap - o1.heatmap).abs().max().item<double>(), 0.0);
  EXPECT_THROW(model_->point_decode(emb, 3), std::out_of_range);
  EXPECT_THROW(model_->point_decode(emb, -1), std::out_of_range);

  auto& tasks = model_->point_decoder->task_tokens;
  tasks.copy_(tasks[0].unsqueeze(0).expand_as(tasks));
  const auto a = model_->point_decode(emb, 0), b = model_->point_decode(emb, 2);
  EXPECT_TRUE(torch::equal(a.heatmap, b.heatmap));
}

TEST_F(ModelTest, PromptEncoding) {
  torch::NoGradGuard g;
  const auto empty = model_->encode_points(single_point_prompts({}, 2));
  EXPECT_EQ(empty.tokens.size(0), 0);

  const auto p = model_->encode_points(
      single_point_prompts({{10, 10}, {10, 10}, {11, 10}, {42, 10}}, 2));
  EXPECT_EQ(p.tokens.sizes(), (std::vector<std::int64_t>{4, 2, 32}));
  EXPECT_TRUE(torch::equal(p.tokens[0], p.tokens[1]));
  const double near = (p.tokens[0][0] - p.tokens[2][0]).norm().item<double>();
  const double far = (p.tokens[0][0] - p.tokens[3][0]).norm().item<double>();
  EXPECT_LT(near, far);
  // Padding slots all carry the same embedding.
  EXPECT_TRUE(torch::equal(p.tokens[0][1], p.tokens[3][1]));

  EXPECT_THROW(model_->encode_points(single_point_prompts({{64, 3}}, 2)), std::out_of_range);
  EXPECT_THROW(model_->encode_points(single_point_prompts({{-1, 3}}, 2)), std::out_of_range);
  PointPrompts bad = single_point_prompts({{1, 1}, {2, 2}}, 2);
  bad.valid = bad.valid.slice(0, 0, 1);
  EXPECT_THROW(model_->encode_points(bad), std::invalid_argument);
}

TEST_F(ModelTest, HMDecoderShapes) {
  torch::NoGradGuard g;
  const auto emb = model_->encode_image(image_);
  for (int k : {1, 5}) {
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < k; ++i) pts.emplace_back(5 + 10 * i, 20);
    const auto b = model_->hm_decode(emb, single_point_prompts(pts, 2), 0);
    EXPECT_EQ(b.word_logits.sizes(), (std::vector<std::int64_t>{k, 24, 24, 2}));
    EXPECT_EQ(b.line_logits.sizes(), (std::vector<std::int64_t>{k, 16, 16, 2}));
    EXPECT_EQ(b.iou_pred.sizes(), (std::vector<std::int64_t>{k, 4}));
    EXPECT_EQ(b.lowres_features.sizes(), (std::vector<std::int64_t>{k, 16, 16, 8}));
    EXPECT_EQ(b.highres_features.sizes(), (std::vector<std::int64_t>{k, 24, 24, 4}));
    EXPECT_GE(b.iou_pred.min().item<double>(), 0.0);
    EXPECT_LE(b.iou_pred.max().item<double>(), 1.0);
    EXPECT_TRUE(torch::equal(b.logits(0), b.word_logits.select(3, 0)));
    EXPECT_TRUE(torch::equal(b.logits(3), b.line_logits.select(3, 1)));
  }
  const auto none = model_->hm_decode(emb, single_point_prompts({}, 2), 0);
  EXPECT_EQ(none.size(), 0);
}

TEST_F(ModelTest, PerPointIndependenceAndPermutation) {
  torch::NoGradGuard g;
  const auto emb = model_->encode_image(image_);
  const auto alone = model_->hm_decode(emb, single_point_prompts({{30, 12}}, 2), 1);
  const auto batch =
      model_->hm_decode(emb, single_point_prompts({{4, 50}, {30, 12}, {60, 60}}, 2), 1);
  EXPECT_LT((alone.word_logits[0] - batch.word_logits[1]).abs().max().item<double>(), 1e-5);
  EXPECT_LT((alone.line_logits[0] - batch.line_logits[1]).abs().max().item<double>(), 1e-5);
  EXPECT_LT((alone.iou_pred[0] - batch.iou_pred[1]).abs().max().item<double>(), 1e-5);
  const auto perm =
      model_->hm_decode(emb, single_point_prompts({{60, 60}, {4, 50}, {30, 12}}, 2), 1);
  EXPECT_LT((perm.line_logits[0] - batch.line_logits[2]).abs().max().item<double>(), 1e-5);
  EXPECT_LT((perm.line_logits[1] - batch.line_logits[0]).abs().max().item<double>(), 1e-5);
}

TEST_F(ModelTest, HMTaskInvarianceWithEqualTokens) {
  torch::NoGradGuard g;
  const auto emb = model_->encode_image(image_);
  const auto prompts = single_point_prompts({{20, 20}, {40, 8}}, 2);
  const auto a = model_->hm_decode(emb, prompts, 0), b = model_->hm_decode(emb, prompts, 2);
  EXPECT_GT((a.line_logits - b.line_logits).abs().max().item<double>(), 0.0);
  auto& tasks = model_->hm_decoder->task_tokens;
  tasks.copy_(tasks[1].unsqueeze(0).expand_as(tasks));
  const auto c = model_->hm_decode(emb, prompts, 0), d = model_->hm_decode(emb, prompts, 2);
  EXPECT_TRUE(torch::equal(c.word_logits, d.word_logits));
  EXPECT_TRUE(torch::equal(c.iou_pred, d.iou_pred));
}

TEST(ModelParams, FrozenBackbonePartition) {
  ModelConfig c = tiny();
  c.freeze_backbone = true;
  EtSam m(c);
  std::size_t trainable = 0;
  for (const auto& item : m->named_parameters(true)) {
    const auto& k = item.key();
    const bool expect = k.find("adapter") != std::string::npos ||
                        k.rfind("point_decoder.", 0) == 0 || k.rfind("hm_decoder.", 0) == 0;
    EXPECT_EQ(item.value().requires_grad(), expect) << k;
    trainable += expect;
  }
  EXPECT_EQ(m->trainable_parameters().size(), trainable);

  // One backward pass only reaches the trainable set.
  torch::manual_seed(1);
  const auto emb = m->encode_image(torch::rand({1, 3, 64, 64}));
  const auto b = m->hm_decode(emb, single_point_prompts({{10, 10}}, 2), 0);
  (m->point_decode(emb, 0).heatmap.sum() + b.word_logits.sum() + b.iou_pred.sum()).backward();
  for (const auto& item : m->named_parameters(true)) {
    if (!item.value().requires_grad()) EXPECT_FALSE(item.value().grad().defined()) << item.key();
  }
  EXPECT_TRUE(m->point_decoder->task_tokens.grad().defined());
  EXPECT_TRUE(m->hm_decoder->task_tokens.grad().defined());

  c.freeze_backbone = false;
  EtSam all(c);
  EXPECT_EQ(all->trainable_parameters().size(), all->parameters().size());
}

TEST(ModelParams, SeededInitIsReproducible) {
  EtSam a(tiny()), b(tiny());
  auto pa = a->parameters(), pb = b->parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_TRUE(torch::equal(pa[i], pb[i]));
}

TEST(ModelGradients, TaskTokensMatchFiniteDifferences) {
  ModelConfig c = tiny();
  c.freeze_backbone = false;
  EtSam m(c);
  m->to(torch::kFloat64);
  m->eval();
  torch::manual_seed(3);
  const auto img = torch::rand({1, 3, 64, 64}, torch::kFloat64);
  const auto prompts = single_point_prompts({{20, 30}, {50, 10}}, 2);
  auto loss = [&]() {
    const auto emb = m->encode_image(img);
    const auto h = m->point_decode(emb, 1).heatmap;
    const auto b = m->hm_decode(emb, prompts, 1);
    return (h * h).mean() + torch::sigmoid(b.line_logits).mean() + b.iou_pred.pow(2).mean();
  };
  for (auto* param : {&m->point_decoder->task_tokens, &m->hm_decoder->task_tokens}) {
    m->zero_grad();
    loss().backward();
    const auto analytic = param->grad().clone();
    const auto flat = param->view({-1});
    torch::NoGradGuard g;
    for (std::int64_t i = 0; i < flat.numel(); i += std::max<std::int64_t>(1, flat.numel() / 24)) {
      const double orig = flat[i].item<double>();
      const double eps = 1e-5;
      flat[i] = orig + eps;
      const double up = loss().item<double>();
      flat[i] = orig - eps;
      const double dn = loss().item<double>();
      flat[i] = orig;
      const double numeric = (up - dn) / (2 * eps);
      const double a = analytic.view({-1})[i].item<double>();
      const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
      EXPECT_LT(std::abs(a - numeric) / scale, 1e-4) << i;
    }
  }
}

TEST(ImageToTensor, ShapeAndRange) {
  cv::Mat img(10, 20, CV_32FC3, cv::Scalar(0.25, 0.5, 0.75));
  const auto t = image_to_tensor(img, 32);
  EXPECT_EQ(t.sizes(), (std::vector<std::int64_t>{1, 3, 32, 32}));
  EXPECT_NEAR(t[0][1][5][5].item<double>(), 0.5, 1e-6);
  EXPECT_THROW(image_to_tensor(cv::Mat(4, 4, CV_8UC3), 32), std::invalid_argument);
}

}  // namespace
}  // namespace etsam
