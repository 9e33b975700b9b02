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
#include "etsam/losses.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace etsam {

namespace {

std::string sizes(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

}  // namespace

torch::Tensor loss_point(const torch::Tensor& pred, const torch::Tensor& target) {
  if (!pred.sizes().equals(target.sizes())) {
    throw std::invalid_argument("loss_point: shape mismatch " + sizes(pred) + " vs " +
                                sizes(target));
  }
  return (pred - target.to(pred.scalar_type())).pow(2).mean();
}

torch::Tensor realized_iou(const torch::Tensor& logits, const torch::Tensor& gt) {
  torch::NoGradGuard guard;
  const auto l = logits.dim() == 2 ? logits.unsqueeze(0) : logits;
  const auto g = gt.dim() == 2 ? gt.unsqueeze(0) : gt;
  const auto p = (l > 0).flatten(1);
  const auto t = (g > 0.5).flatten(1);
  const auto inter = p.logical_and(t).sum(1).to(logits.scalar_type());
  const auto uni = p.logical_or(t).sum(1).to(logits.scalar_type());
  return torch::where(uni > 0, inter / uni.clamp_min(1), torch::ones_like(uni));
}

MaskLossTerms loss_mask(const torch::Tensor& logits, const torch::Tensor& gt,
                        const torch::Tensor& iou_pred) {
  if (!logits.sizes().equals(gt.sizes())) {
    throw std::invalid_argument("loss_mask: shape mismatch " + sizes(logits) + " vs " +
                                sizes(gt));
  }
  const auto g = gt.to(logits.scalar_type());
  if (!(g.eq(0).logical_or(g.eq(1))).all().item<bool>()) {
    throw std::invalid_argument("loss_mask: gt must be binary");
  }
  const auto l = logits.dim() == 2 ? logits.unsqueeze(0) : logits;
  const auto t = g.dim() == 2 ? g.unsqueeze(0) : g;
  const auto ip = iou_pred.reshape({-1});
  if (ip.size(0) != l.size(0)) {
    throw std::invalid_argument("loss_mask: iou_pred has " + std::to_string(ip.size(0)) +
                                " entries for " + std::to_string(l.size(0)) + " masks");
  }
  MaskLossTerms out;
  out.bce = torch::binary_cross_entropy_with_logits(l, t, {}, {}, at::Reduction::None)
                .flatten(1)
                .mean(1)
                .mean();
  const auto p = torch::sigmoid(l).flatten(1);
  const auto tf = t.flatten(1);
  const auto num = 2.0 * (p * tf).sum(1) + kDiceSmooth;
  const auto den = p.sum(1) + tf.sum(1) + kDiceSmooth;
  out.dice = (1.0 - num / den).mean();
  out.iou_mse = (ip - realized_iou(l, t)).pow(2).mean();
  return out;
}

std::string LossReport::to_json(long long step) const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["L_point"] = L_point;
  j["L_word"] = L_word;
  j["L_word_group"] = L_word_group;
  j["L_line"] = L_line;
  j["L_para"] = L_para;
  j["L_total"] = L_total;
  return j.dump();
}

LossReport total_loss(const LossParts& parts) {
  auto take = [](const std::optional<double>& v, const char* name) {
    if (!v) return 0.0;
    if (!std::isfinite(*v)) throw std::invalid_argument(std::string(name) + " is not finite");
    if (*v < 0) throw std::invalid_argument(std::string(name) + " is negative");
    return *v;
  };
  LossReport r;
  r.L_point = take(parts.point, "L_point");
  r.L_word = take(parts.word, "L_word");
  r.L_word_group = take(parts.word_group, "L_word_group");
  r.L_line = take(parts.line, "L_line");
  r.L_para = take(parts.para, "L_para");
  r.L_total = kPointWeight * r.L_point + r.L_word + r.L_word_group + r.L_line +
              kParagraphWeight * r.L_para;
  return r;
}

torch::Tensor total_loss(const torch::Tensor& point, const torch::Tensor& word,
                         const torch::Tensor& word_group, const torch::Tensor& line,
                         const torch::Tensor& para) {
  torch::Tensor sum;
  auto add = [&sum](const torch::Tensor& t, double w) {
    if (!t.defined()) return;
    sum = sum.defined() ? sum + w * t : w * t;
  };
  add(point, kPointWeight);
  add(word, 1.0);
  add(word_group, 1.0);
  add(line, 1.0);
  add(para, kParagraphWeight);
  return sum.defined() ? sum : torch::zeros({});
}

}  // namespace etsam
