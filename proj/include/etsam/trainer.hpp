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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include <torch/torch.h>

#include "etsam/augment.hpp"
#include "etsam/checkpoint.hpp"
#include "etsam/heatmap.hpp"
#include "etsam/losses.hpp"
#include "etsam/model.hpp"
#include "etsam/pool.hpp"
#include "etsam/prompts.hpp"

namespace etsam {

enum class HeatmapKind { kCenterLine, kCenterPoint };

struct TrainConfig {
  std::int64_t steps = 1000;
  double lr = 1e-4;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::int64_t lr_decay_step = -1;  // lr *= 0.1 from this step on; < 0 disables
  std::uint64_t seed = 0;
  bool augment = true;
  AugmentConfig augment_cfg;
  bool use_double = false;
  // From this step on, line-only samples train L_point against refined
  // pseudo heatmaps; before it (or always when < 0) their L_point is masked.
  std::int64_t pseudo_label_step = -1;
  int pseudo_dilation = 2;
  HeatmapKind heatmap_kind = HeatmapKind::kCenterLine;
  HeatmapConfig heatmap;
  PromptConfig prompts;
  std::int64_t checkpoint_every = 0;  // 0: only at the end of run()
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;  // JSON lines, appended
  int threads = 1;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Target heatmap of a sample with word annotations, at S/4.
Heatmap target_heatmap(const HierSample& s, HeatmapKind kind, const HeatmapConfig& cfg);

torch::Tensor grid_to_tensor(const Grid<double>& g, torch::ScalarType dtype);
torch::Tensor masks_to_tensor(const std::vector<Mask>& masks, torch::ScalarType dtype);
Grid<double> tensor_to_grid(const torch::Tensor& t);

class Trainer {
 public:
  Trainer(EtSam model, const DataPool& pool, TrainConfig cfg);

  // One optimizer step on the pool batch of the current global step.
  LossReport step();
  // Steps until cfg.steps, then writes the final checkpoint when a path is set.
  void run(const std::function<void(std::int64_t, const LossReport&)>& on_step = {});

  // Restores weights, optimizer moments and the step counter.
  void resume(const Checkpoint& ckpt);
  void save(const std::filesystem::path& path);

  std::int64_t current_step() const { return step_; }
  EtSam model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  struct Cached {
    HierSample sample;
    torch::Tensor image;
    std::optional<Heatmap> heat;
  };
  Cached& cached(const BatchItem& item);
  void build_pseudo_labels();
  double current_lr() const;

  EtSam model_;
  const DataPool& pool_;
  TrainConfig cfg_;
  std::unique_ptr<torch::optim::AdamW> optimizer_;
  std::map<std::pair<int, std::size_t>, Cached> cache_;
  bool pseudo_ready_ = false;
  std::int64_t step_ = 0;
};

}  // namespace etsam
