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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "etsam/annotations.hpp"
#include "etsam/postprocess.hpp"

namespace etsam {

struct MatchCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double iou_sum = 0.0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp, fp += o.fp, fn += o.fn, iou_sum += o.iou_sum;
    return *this;
  }
};

struct MatchedPair {
  int pred = 0;
  int gt = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchedPair> tp;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  MatchCounts counts() const;
};

// Greedy one-to-one matching by descending IoU; pairs at or above
// `iou_thresh` become true positives.
MatchResult match(std::span<const Mask> preds, std::span<const Mask> gts,
                  double iou_thresh = 0.5);

// All values are fractions in [0, 1].
struct MetricReport {
  double pq = 0, f = 0, p = 0, r = 0, t = 0;
};

// PQ = F * T, F = TP / (TP + FP/2 + FN/2). No predictions and no ground
// truth counts as perfect agreement.
MetricReport compute_metrics(const MatchCounts& c);
inline MetricReport compute_metrics(const MatchResult& m) { return compute_metrics(m.counts()); }

// The factorizations compute_metrics relies on; usable on reported tables.
double pq_from_f_t(double f, double t);
double f_from_p_r(double p, double r);

// Ground-truth instance masks at image resolution.
std::vector<Mask> gt_masks(const HierSample& gt, Granularity g);
std::vector<Mask> pred_masks(const DetectionSet& pred, Granularity g);

// Layout entities: union of each predicted cluster's word groups against the
// union of each GT paragraph's words (its own region when it has no words).
std::vector<Mask> pred_layout_masks(const DetectionSet& pred, int rows, int cols);
std::vector<Mask> gt_layout_masks(const HierSample& gt);
MatchResult eval_layout(const DetectionSet& pred, const HierSample& gt, double iou_thresh = 0.5);

enum class EvalLevel : int { kWord = 0, kLine = 1, kLayout = 2 };
inline constexpr int kNumEvalLevels = 3;
const char* eval_level_name(EvalLevel l);

// Micro-averaged dataset evaluation: counts are pooled over images and the
// metrics computed once.
class DatasetEvaluator {
 public:
  explicit DatasetEvaluator(double iou_thresh = 0.5) : iou_thresh_(iou_thresh) {}

  void add(const DetectionSet& pred, const HierSample& gt);
  void add_counts(EvalLevel level, const MatchCounts& c) {
    counts_[static_cast<int>(level)] += c;
    ++images_[static_cast<int>(level)];
  }
  // Images that contributed to a level.
  std::int64_t images(EvalLevel level) const { return images_[static_cast<int>(level)]; }
  const MatchCounts& counts(EvalLevel level) const { return counts_[static_cast<int>(level)]; }
  MetricReport report(EvalLevel level) const { return compute_metrics(counts(level)); }
  // Level applies when the GT carries the needed annotations.
  static bool applicable(EvalLevel level, const HierSample& gt);

  // Levels no image contributed to are null.
  std::string to_json() const;

 private:
  double iou_thresh_;
  std::array<MatchCounts, kNumEvalLevels> counts_{};
  std::array<std::int64_t, kNumEvalLevels> images_{};
};

}  // namespace etsam
