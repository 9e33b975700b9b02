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
#include "etsam/evaluation.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace etsam {

MatchCounts MatchResult::counts() const {
  MatchCounts c;
  c.tp = static_cast<std::int64_t>(tp.size());
  c.fp = fp;
  c.fn = fn;
  for (const auto& m : tp) c.iou_sum += m.iou;
  return c;
}

MatchResult match(std::span<const Mask> preds, std::span<const Mask> gts, double iou_thresh) {
  std::vector<MatchedPair> cands;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (!preds[i].same_shape(gts[j])) {
        throw std::invalid_argument("match: prediction and ground-truth grids differ");
      }
      const double iou = mask_iou(preds[i], gts[j]);
      if (iou >= iou_thresh) cands.push_back({static_cast<int>(i), static_cast<int>(j), iou});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const MatchedPair& a, const MatchedPair& b) { return a.iou > b.iou; });
  std::vector<bool> pred_used(preds.size()), gt_used(gts.size());
  MatchResult out;
  for (const auto& c : cands) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = gt_used[c.gt] = true;
    out.tp.push_back(c);
  }
  out.fp = static_cast<std::int64_t>(preds.size() - out.tp.size());
  out.fn = static_cast<std::int64_t>(gts.size() - out.tp.size());
  return out;
}

double pq_from_f_t(double f, double t) { return f * t; }

double f_from_p_r(double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; }

MetricReport compute_metrics(const MatchCounts& c) {
  if (c.tp == 0 && c.fp == 0 && c.fn == 0) return {1, 1, 1, 1, 1};
  MetricReport m;
  const double tp = static_cast<double>(c.tp);
  m.p = c.tp + c.fp > 0 ? tp / static_cast<double>(c.tp + c.fp) : 0.0;
  m.r = c.tp + c.fn > 0 ? tp / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f = tp / (tp + 0.5 * static_cast<double>(c.fp) + 0.5 * static_cast<double>(c.fn));
  m.t = c.tp > 0 ? c.iou_sum / tp : 0.0;
  m.pq = pq_from_f_t(m.f, m.t);
  return m;
}

std::vector<Mask> gt_masks(const HierSample& gt, Granularity g) {
  std::vector<Mask> out;
  const int rows = gt.height, cols = gt.width;
  switch (g) {
    case Granularity::kWord:
      for (std::size_t i = 0; i < gt.words.size(); ++i) {
        out.push_back(word_mask(gt, i, rows, cols, 1.0));
      }
      break;
    case Granularity::kWordGroup:
      for (std::size_t i = 0; i < gt.lines.size(); ++i) {
        if (!gt.lines[i].word_ids.empty()) out.push_back(word_group_mask(gt, i, rows, cols, 1.0));
      }
      break;
    case Granularity::kLine:
      for (std::size_t i = 0; i < gt.lines.size(); ++i) {
        out.push_back(line_mask(gt, i, rows, cols, 1.0));
      }
      break;
    case Granularity::kParagraph:
      for (std::size_t i = 0; i < gt.paragraphs.size(); ++i) {
        out.push_back(paragraph_mask(gt, i, rows, cols, 1.0));
      }
      break;
  }
  return out;
}

std::vector<Mask> pred_masks(const DetectionSet& pred, Granularity g) {
  std::vector<Mask> out;
  for (const auto& d : pred.of(g)) out.push_back(d.mask);
  return out;
}

std::vector<Mask> pred_layout_masks(const DetectionSet& pred, int rows, int cols) {
  const auto& members = pred.word_groups.empty() ? pred.paragraphs : pred.word_groups;
  std::map<int, Mask> by_cluster;
  for (const auto& d : members) {
    if (d.cluster < 0) continue;
    auto [it, inserted] = by_cluster.try_emplace(d.cluster, rows, cols);
    mask_union_into(it->second, d.mask);
  }
  std::vector<Mask> out;
  for (auto& [id, m] : by_cluster) {
    if (mask_area(m) > 0) out.push_back(std::move(m));
  }
  return out;
}

std::vector<Mask> gt_layout_masks(const HierSample& gt) {
  std::vector<Mask> out;
  for (std::size_t p = 0; p < gt.paragraphs.size(); ++p) {
    Mask m(gt.height, gt.width);
    for (int lid : gt.paragraphs[p].line_ids) {
      for (std::size_t l = 0; l < gt.lines.size(); ++l) {
        if (gt.lines[l].id == lid) {
          mask_union_into(m, word_group_mask(gt, l, gt.height, gt.width, 1.0));
        }
      }
    }
    if (mask_area(m) == 0) m = paragraph_mask(gt, p, gt.height, gt.width, 1.0);
    out.push_back(std::move(m));
  }
  return out;
}

MatchResult eval_layout(const DetectionSet& pred, const HierSample& gt, double iou_thresh) {
  const auto gts = gt_layout_masks(gt);
  const auto preds = pred_layout_masks(pred, gt.height, gt.width);
  return match(preds, gts, iou_thresh);
}

const char* eval_level_name(EvalLevel l) {
  switch (l) {
    case EvalLevel::kWord: return "word";
    case EvalLevel::kLine: return "line";
    case EvalLevel::kLayout: return "layout";
  }
  return "?";
}

bool DatasetEvaluator::applicable(EvalLevel level, const HierSample& gt) {
  switch (level) {
    case EvalLevel::kWord: return gt.task != Task::kLine;
    case EvalLevel::kLine: return gt.task != Task::kWord;
    case EvalLevel::kLayout: return gt.task == Task::kMulti;
  }
  return false;
}

void DatasetEvaluator::add(const DetectionSet& pred, const HierSample& gt) {
  if (applicable(EvalLevel::kWord, gt)) {
    add_counts(EvalLevel::kWord, match(pred_masks(pred, Granularity::kWord),
                                       gt_masks(gt, Granularity::kWord), iou_thresh_).counts());
  }
  if (applicable(EvalLevel::kLine, gt)) {
    add_counts(EvalLevel::kLine, match(pred_masks(pred, Granularity::kLine),
                                       gt_masks(gt, Granularity::kLine), iou_thresh_).counts());
  }
  if (applicable(EvalLevel::kLayout, gt)) {
    add_counts(EvalLevel::kLayout, eval_layout(pred, gt, iou_thresh_).counts());
  }
}

std::string DatasetEvaluator::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (int l = 0; l < kNumEvalLevels; ++l) {
    const auto level = static_cast<EvalLevel>(l);
    if (images(level) == 0) {
      j[eval_level_name(level)] = nullptr;
      continue;
    }
    const MatchCounts& c = counts(level);
    const MetricReport m = report(level);
    j[eval_level_name(level)] = {
        {"images", images(level)}, {"PQ", 100 * m.pq}, {"F", 100 * m.f},
        {"P", 100 * m.p},          {"R", 100 * m.r},   {"T", 100 * m.t},
        {"tp", c.tp},              {"fp", c.fp},       {"fn", c.fn},
        {"iou_sum", c.iou_sum}};
  }
  return j.dump(2);
}

}  // namespace etsam
