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

#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <torch/torch.h>

#include "etsam/losses.hpp"
#include "json.hpp"

namespace etsam {
namespace {

auto f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

TEST(LossPoint, Basics) {
  const auto h = torch::rand({16, 16}, f64());
  EXPECT_EQ(loss_point(h, h).item<double>(), 0.0);
  EXPECT_NEAR(loss_point(h + 0.1, h).item<double>(), 0.01, 1e-12);
  EXPECT_THROW(loss_point(h, torch::rand({8, 16}, f64())), std::invalid_argument);
}

TEST(LossPoint, NaiveSummationOracle) {
  torch::manual_seed(4);
  const auto a = torch::rand({13, 17}, f64()), b = torch::rand({13, 17}, f64());
  const auto pa = a.accessor<double, 2>(), pb = b.accessor<double, 2>();
  double sum = 0;
  for (int r = 0; r < 13; ++r)
    for (int c = 0; c < 17; ++c) sum += (pa[r][c] - pb[r][c]) * (pa[r][c] - pb[r][c]);
  EXPECT_NEAR(loss_point(a, b).item<double>(), sum / (13 * 17), 1e-10);
}

TEST(LossMask, PerfectLogits) {
  const auto gt = (torch::rand({2, 8, 8}, f64()) > 0.5).to(torch::kFloat64);
  const auto logits = (gt * 2 - 1) * 30;
  const auto t = loss_mask(logits, gt, torch::ones({2}, f64()));
  EXPECT_LE(t.total().item<double>(), 1e-3 + 1.0 / 33);  // dice smoothing floor
  EXPECT_LE(t.bce.item<double>(), 1e-6);
  EXPECT_EQ(t.iou_mse.item<double>(), 0.0);
}

TEST(LossMask, EmptyConvention) {
  const auto gt = torch::zeros({8, 8}, f64());
  const auto logits = torch::full({8, 8}, -30.0, f64());
  const auto t = loss_mask(logits, gt, torch::ones({1}, f64()));
  EXPECT_NEAR(t.total().item<double>(), 0.0, 1e-6);
  EXPECT_EQ(realized_iou(logits, gt).item<double>(), 1.0);
  EXPECT_EQ(realized_iou(-logits, gt).item<double>(), 0.0);
}

TEST(LossMask, PerTermOracle) {
  std::mt19937 rng(8);
  std::normal_distribution<double> n(0, 2);
  std::bernoulli_distribution bit(0.4);
  std::uniform_real_distribution<double> u(0, 1);
  const int k = 3, h = 6, w = 7;
  std::vector<double> lv(k * h * w), gv(k * h * w), iv(k);
  for (auto& v : lv) v = n(rng);
  for (auto& v : gv) v = bit(rng);
  for (auto& v : iv) v = u(rng);
  const auto logits = torch::tensor(lv, f64()).view({k, h, w});
  const auto gt = torch::tensor(gv, f64()).view({k, h, w});
  const auto ip = torch::tensor(iv, f64());
  double bce = 0, dice = 0, mse = 0;
  for (int m = 0; m < k; ++m) {
    double b = 0, pt = 0, ps = 0, ts = 0;
    int inter = 0, uni = 0;
    for (int i = 0; i < h * w; ++i) {
      const double x = lv[m * h * w + i], y = gv[m * h * w + i];
      const double p = 1 / (1 + std::exp(-x));
      b += -(y * std::log(p) + (1 - y) * std::log(1 - p));
      pt += p * y, ps += p, ts += y;
      inter += (x > 0) && y > 0.5;
      uni += (x > 0) || y > 0.5;
    }
    bce += b / (h * w);
    dice += 1 - (2 * pt + 1) / (ps + ts + 1);
    const double real = uni ? static_cast<double>(inter) / uni : 1.0;
    mse += (iv[m] - real) * (iv[m] - real);
  }
  const auto t = loss_mask(logits, gt, ip);
  EXPECT_NEAR(t.bce.item<double>(), bce / k, 1e-8);
  EXPECT_NEAR(t.dice.item<double>(), dice / k, 1e-8);
  EXPECT_NEAR(t.iou_mse.item<double>(), mse / k, 1e-8);
}

TEST(LossMask, Errors) {
  const auto l = torch::zeros({4, 4}, f64());
  EXPECT_THROW(loss_mask(l, torch::full({4, 4}, 0.5, f64()), torch::ones({1}, f64())),
               std::invalid_argument);
  EXPECT_THROW(loss_mask(l, torch::zeros({4, 5}, f64()), torch::ones({1}, f64())),
               std::invalid_argument);
  EXPECT_THROW(loss_mask(l, torch::zeros({4, 4}, f64()), torch::ones({2}, f64())),
               std::invalid_argument);
}

// Central differences of f at x (8 x 8, float64) against autograd.
double max_rel_grad_error(const std::function<torch::Tensor(const torch::Tensor&)>& f,
                          torch::Tensor x) {
  x = x.clone().set_requires_grad(true);
  f(x).backward();
  const auto g = x.grad().clone();
  double worst = 0;
  torch::NoGradGuard guard;
  auto flat = x.view({-1});
  for (std::int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>(), eps = 1e-6;
    flat[i] = orig + eps;
    const double up = f(x).item<double>();
    flat[i] = orig - eps;
    const double dn = f(x).item<double>();
    flat[i] = orig;
    const double num = (up - dn) / (2 * eps);
    const double a = g.view({-1})[i].item<double>();
    worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-8}));
  }
  return worst;
}

TEST(LossGradients, FiniteDifferences) {
  torch::manual_seed(2);
  const auto target = torch::rand({8, 8}, f64());
  const auto gt = (torch::rand({8, 8}, f64()) > 0.5).to(torch::kFloat64);
  const auto ip = torch::full({1}, 0.3, f64());
  EXPECT_LT(max_rel_grad_error([&](const torch::Tensor& x) { return loss_point(x, target); },
                               torch::rand({8, 8}, f64())),
            1e-4);
  EXPECT_LT(max_rel_grad_error(
                [&](const torch::Tensor& x) { return loss_mask(x, gt, ip).total(); },
                torch::randn({8, 8}, f64())),
            1e-4);
}

TEST(TotalLoss, Weights) {
  EXPECT_DOUBLE_EQ(total_loss(LossParts{1.0, 1.0, 1.0, 1.0, 1.0}).L_total, 53.5);
  EXPECT_DOUBLE_EQ(total_loss(LossParts{0.2, {}, {}, {}, {}}).L_total, 10.0);
  EXPECT_NEAR(total_loss(LossParts{0.1, 0.2, 0.3, 0.4, 0.5}).L_total, 6.15, 1e-12);
  EXPECT_THROW(total_loss(LossParts{-0.1, {}, {}, {}, {}}), std::invalid_argument);
  EXPECT_THROW(total_loss(LossParts{NAN, {}, {}, {}, {}}), std::invalid_argument);
  const auto t = total_loss(torch::full({}, 0.1, f64()), torch::full({}, 0.2, f64()), {}, {},
                            torch::full({}, 0.5, f64()));
  EXPECT_NEAR(t.item<double>(), 5.45, 1e-12);
}

TEST(TotalLoss, JsonRecord) {
  const auto r = total_loss(LossParts{0.1, 0.2, 0.3, 0.4, 0.5});
  const auto j = nlohmann::json::parse(r.to_json(12));
  EXPECT_EQ(j["step"], 12);
  EXPECT_NEAR(j["L_total"].get<double>(), 6.15, 1e-12);
  EXPECT_EQ(j.size(), 7u);
}

}  // namespace
}  // namespace etsam
