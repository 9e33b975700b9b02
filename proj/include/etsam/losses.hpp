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
#pragma once

#include <optional>
#include <string>

#include <torch/torch.h>

namespace etsam {

inline constexpr double kPointWeight = 50.0;
inline constexpr double kParagraphWeight = 0.5;
inline constexpr double kDiceSmooth = 1.0;

// Mean squared error over heatmap cells.
torch::Tensor loss_point(const torch::Tensor& pred, const torch::Tensor& target);

struct MaskLossTerms {
  torch::Tensor bce;
  torch::Tensor dice;
  torch::Tensor iou_mse;

  torch::Tensor total() const { return bce + dice + iou_mse; }
};

// Realized IoU of (logits > 0) against gt per mask; empty vs empty is 1.
torch::Tensor realized_iou(const torch::Tensor& logits, const torch::Tensor& gt);

// logits, gt: (K, H, W) or (H, W); iou_pred: (K) or scalar. Each term is the
// mean over masks of the per-mask value; BCE is averaged over cells.
MaskLossTerms loss_mask(const torch::Tensor& logits, const torch::Tensor& gt,
                        const torch::Tensor& iou_pred);

// Per-component values of one batch; absent components are nullopt.
struct LossParts {
  std::optional<double> point, word, word_group, line, para;
};

struct LossReport {
  double L_point = 0, L_word = 0, L_word_group = 0, L_line = 0, L_para = 0, L_total = 0;

  std::string to_json(long long step) const;
};

// Weighted sum 50 Lp + Lw + Lwg + Ll + 0.5 Lpara; absent parts count as 0.
LossReport total_loss(const LossParts& parts);

// Same weighting on tensors; undefined tensors count as 0.
torch::Tensor total_loss(const torch::Tensor& point, const torch::Tensor& word,
                         const torch::Tensor& word_group, const torch::Tensor& line,
                         const torch::Tensor& para);

}  // namespace etsam
