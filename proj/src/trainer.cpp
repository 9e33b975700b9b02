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
#include "etsam/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace etsam {

using torch::indexing::Slice;

Heatmap target_heatmap(const HierSample& s, HeatmapKind kind, const HeatmapConfig& cfg) {
  return kind == HeatmapKind::kCenterLine ? centerline_heatmap(s.words, s.height, s.width, cfg)
                                          : centerpoint_heatmap(s.words, s.height, s.width, cfg);
}

torch::Tensor grid_to_tensor(const Grid<double>& g, torch::ScalarType dtype) {
  auto t = torch::empty({g.rows(), g.cols()}, torch::kFloat64);
  std::memcpy(t.data_ptr<double>(), g.data(), sizeof(double) * g.values().size());
  return t.to(dtype);
}

torch::Tensor masks_to_tensor(const std::vector<Mask>& masks, torch::ScalarType dtype) {
  if (masks.empty()) return torch::empty({0}, dtype);
  const int h = masks[0].rows(), w = masks[0].cols();
  auto t = torch::empty({static_cast<int64_t>(masks.size()), h, w}, torch::kUInt8);
  auto* p = t.data_ptr<std::uint8_t>();
  for (const auto& m : masks) {
    std::memcpy(p, m.data(), static_cast<std::size_t>(h) * w);
    p += static_cast<std::size_t>(h) * w;
  }
  return t.to(dtype);
}

Grid<double> tensor_to_grid(const torch::Tensor& t) {
  const auto c = t.detach().to(torch::kFloat64).contiguous().cpu();
  Grid<double> g(static_cast<int>(c.size(0)), static_cast<int>(c.size(1)));
  std::memcpy(g.data(), c.data_ptr<double>(), sizeof(double) * g.values().size());
  return g;
}

Trainer::Trainer(EtSam model, const DataPool& pool, TrainConfig cfg)
    : model_(std::move(model)), pool_(pool), cfg_(std::move(cfg)) {
  torch::set_num_threads(cfg_.threads);
  at::globalContext().setFlushDenormal(true);
  torch::manual_seed(cfg_.seed);
  if (cfg_.use_double) model_->to(torch::kFloat64);
  model_->train();
  if (!cfg_.log_path.empty() && cfg_.log_path.has_parent_path()) {
    std::filesystem::create_directories(cfg_.log_path.parent_path());
  }
  optimizer_ = std::make_unique<torch::optim::AdamW>(
      model_->trainable_parameters(),
      torch::optim::AdamWOptions(cfg_.lr)
          .betas({cfg_.beta1, cfg_.beta2})
          .weight_decay(cfg_.weight_decay));
}

double Trainer::current_lr() const {
  return (cfg_.lr_decay_step >= 0 && step_ >= cfg_.lr_decay_step) ? cfg_.lr * 0.1 : cfg_.lr;
}

Trainer::Cached& Trainer::cached(const BatchItem& item) {
  const auto key = std::make_pair(task_index(item.task), item.index);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  const int size = model_->config().input_size;
  Cached c;
  c.sample = letterbox(*item.sample, size);
  if (c.sample.image.empty()) {
    throw TrainingError("sample " + item.sample->image_id + " has no image loaded");
  }
  c.image = image_to_tensor(c.sample.image, size, model_->dtype());
  if (item.task != Task::kLine) {
    c.heat = target_heatmap(c.sample, cfg_.heatmap_kind, cfg_.heatmap);
  }
  return cache_.emplace(key, std::move(c)).first->second;
}

void Trainer::build_pseudo_labels() {
  torch::NoGradGuard guard;
  const auto& lines = pool_.set(Task::kLine);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    Cached& c = cached({Task::kLine, i, &lines[i]});
    const auto emb = model_->encode_image(c.image);
    const auto pd = model_->point_decode(emb, task_index(Task::kWord));
    Heatmap pred{tensor_to_grid(pd.heatmap[0]), kHeatmapStride};
    c.heat = refine_pseudo_heatmap(pred, c.sample.lines, cfg_.pseudo_dilation);
  }
  pseudo_ready_ = true;
}

LossReport Trainer::step() {
  if (cfg_.pseudo_label_step >= 0 && step_ >= cfg_.pseudo_label_step && !pseudo_ready_) {
    build_pseudo_labels();
  }
  for (auto& group : optimizer_->param_groups()) {
    static_cast<torch::optim::AdamWOptions&>(group.options()).lr(current_lr());
  }

  const auto items = pool_.batch_at(static_cast<std::uint64_t>(step_));
  const int size = model_->config().input_size;
  const int np = model_->config().points_per_prompt;
  const auto dtype = model_->dtype();
  std::mt19937_64 rng(cfg_.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(step_));
  const PromptGrids grids{size};

  std::vector<torch::Tensor> images;
  std::vector<std::optional<Heatmap>> heats;
  std::vector<PromptSet> prompts;
  for (const auto& item : items) {
    Cached& c = cached(item);
    const HierSample* sample = &c.sample;
    std::optional<Heatmap> heat = c.heat;
    torch::Tensor image = c.image;
    Augmented aug;
    if (cfg_.augment) {
      const Heatmap base = heat ? *heat : Heatmap{Grid<double>(size / 4, size / 4), kHeatmapStride};
      aug = augment(c.sample, base, random_augment(rng, cfg_.augment_cfg));
      sample = &aug.sample;
      if (heat) heat = aug.heat;
      image = image_to_tensor(aug.sample.image, size, dtype);
    }
    const Heatmap prompt_heat =
        heat ? *heat : Heatmap{Grid<double>(size / 4, size / 4), kHeatmapStride};
    prompts.push_back(sample_prompts(*sample, prompt_heat, rng, grids, cfg_.prompts));
    images.push_back(image);
    heats.push_back(heat);
  }

  const auto emb = model_->encode_image(torch::cat(images, 0));
  const double n = static_cast<double>(items.size());
  torch::Tensor lp, parts[kNumGranularities];
  auto accumulate = [](torch::Tensor& acc, const torch::Tensor& v) {
    acc = acc.defined() ? acc + v : v;
  };
  bool any_point = false;
  bool any_part[kNumGranularities] = {false, false, false, false};
  for (std::size_t i = 0; i < items.size(); ++i) {
    const int task = task_index(items[i].task);
    const auto e = emb.index({Slice(i, i + 1)});
    if (heats[i]) {
      const auto pd = model_->point_decode(e, task);
      accumulate(lp, loss_point(pd.heatmap[0], grid_to_tensor(heats[i]->values, dtype)));
      any_point = true;
    }
    const PromptSet& ps = prompts[i];
    if (ps.size() == 0) continue;
    const auto k = static_cast<int64_t>(ps.size());
    PointPrompts pp;
    pp.coords = torch::zeros({k, np, 2}, torch::kFloat64);
    pp.valid = torch::zeros({k, np}, torch::kBool);
    for (int64_t j = 0; j < k; ++j) {
      for (std::size_t q = 0; q < ps.points[j].size() && q < static_cast<std::size_t>(np); ++q) {
        pp.coords[j][q][0] = ps.points[j][q].x;
        pp.coords[j][q][1] = ps.points[j][q].y;
        pp.valid[j][q] = true;
      }
    }
    pp = model_->encode_points(pp);
    const MaskBundle b = model_->hm_decode(e, pp, task);
    for (int g = 0; g < kNumGranularities; ++g) {
      if (ps.masks[g].empty()) continue;
      const auto gt = masks_to_tensor(ps.masks[g], dtype);
      accumulate(parts[g], loss_mask(b.logits(g), gt, b.iou_pred.select(1, g)).total());
      any_part[g] = true;
    }
  }
  auto scaled = [n](const torch::Tensor& t) { return t.defined() ? t / n : t; };
  const auto total = total_loss(scaled(lp), scaled(parts[0]), scaled(parts[1]), scaled(parts[2]),
                                scaled(parts[3]));

  const double total_value = total.item<double>();
  if (!std::isfinite(total_value)) {
    std::ostringstream os;
    os << "non-finite loss at step " << step_ << " (epoch "
       << step_ / static_cast<std::int64_t>(pool_.epoch_length()) << ", batch "
       << step_ % static_cast<std::int64_t>(pool_.epoch_length()) << ", images:";
    for (const auto& item : items) os << ' ' << item.sample->image_id;
    os << ')';
    throw TrainingError(os.str());
  }

  optimizer_->zero_grad();
  if (total.requires_grad()) total.backward();
  optimizer_->step();

  auto value = [&](const torch::Tensor& t, bool present) -> std::optional<double> {
    if (!present) return std::nullopt;
    return t.item<double>() / n;
  };
  const LossReport report = total_loss(LossParts{
      value(lp, any_point), value(parts[0], any_part[0]), value(parts[1], any_part[1]),
      value(parts[2], any_part[2]), value(parts[3], any_part[3])});

  if (!cfg_.log_path.empty()) {
    std::ofstream log(cfg_.log_path, std::ios::app);
    log << report.to_json(step_) << '\n';
  }
  ++step_;
  if (cfg_.checkpoint_every > 0 && step_ % cfg_.checkpoint_every == 0 &&
      !cfg_.checkpoint_path.empty()) {
    save(cfg_.checkpoint_path);
  }
  return report;
}

void Trainer::run(const std::function<void(std::int64_t, const LossReport&)>& on_step) {
  while (step_ < cfg_.steps) {
    const LossReport r = step();
    if (on_step) on_step(step_ - 1, r);
  }
  if (!cfg_.checkpoint_path.empty()) save(cfg_.checkpoint_path);
}

void Trainer::resume(const Checkpoint& ckpt) {
  load_weights(model_, ckpt);
  load_optimizer_state(*optimizer_, ckpt);
  step_ = ckpt.step;
  pseudo_ready_ = false;
  // Pseudo labels saved with the checkpoint come from the model at
  // pseudo_label_step, not the resumed one.
  const auto& lines = pool_.set(Task::kLine);
  std::size_t restored = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const torch::Tensor* t = ckpt.find("pseudo." + std::to_string(i));
    if (!t) continue;
    cached({Task::kLine, i, &lines[i]}).heat = Heatmap{tensor_to_grid(*t), kHeatmapStride};
    ++restored;
  }
  pseudo_ready_ = !lines.empty() && restored == lines.size();
}

void Trainer::save(const std::filesystem::path& path) {
  Checkpoint c = make_checkpoint(model_, step_, optimizer_.get());
  if (pseudo_ready_) {
    const auto& lines = pool_.set(Task::kLine);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const Cached& cc = cached({Task::kLine, i, &lines[i]});
      if (cc.heat) {
        c.arrays.emplace_back("pseudo." + std::to_string(i),
                              grid_to_tensor(cc.heat->values, torch::kFloat64));
      }
    }
  }
  write_checkpoint(path, c);
}

}  // namespace etsam
