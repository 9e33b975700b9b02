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

#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "etsam/evaluation.hpp"
#include "etsam/synthdata.hpp"
#include "json.hpp"
#include "oracles.hpp"

namespace etsam {
namespace {

Mask box(int r0, int c0, int r1, int c1, int size = 32) {
  Mask m(size, size);
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) m(r, c) = 1;
  return m;
}

TEST(Match, IdenticalAllTp) {
  std::mt19937 rng(1);
  const auto gts = oracle::random_rect_masks(rng, 5, 32);
  const auto m = match(gts, gts);
  EXPECT_EQ(m.tp.size(), 5u);
  EXPECT_EQ(m.fp, 0);
  EXPECT_EQ(m.fn, 0);
  for (const auto& p : m.tp) EXPECT_DOUBLE_EQ(p.iou, 1.0);
}

TEST(Match, NoPredictions) {
  const std::vector<Mask> gts = {box(0, 0, 4, 4), box(10, 10, 14, 14)};
  const auto m = match({}, gts);
  EXPECT_TRUE(m.tp.empty());
  EXPECT_EQ(m.fp, 0);
  EXPECT_EQ(m.fn, 2);
}

TEST(Match, ShapeMismatchThrows) {
  const std::vector<Mask> a = {box(0, 0, 4, 4, 16)};
  const std::vector<Mask> b = {box(0, 0, 4, 4, 32)};
  EXPECT_THROW(match(a, b), std::invalid_argument);
}

// Best total IoU over all one-to-one assignments, counting pairs >= 0.5.
double exhaustive_best(const std::vector<Mask>& p, const std::vector<Mask>& g,
                       std::vector<int>* best_perm) {
  std::vector<int> perm(g.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = -1;
  do {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double v = oracle::iou(p[i], g[perm[i]]);
      if (v >= 0.5) s += v;
    }
    if (s > best) best = s, *best_perm = perm;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST(Match, GreedyEqualsExhaustiveWhenAboveHalf) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> shift(-1, 1);
  int checked = 0;
  for (int trial = 0; trial < 300 && checked < 60; ++trial) {
    std::vector<Mask> gts, preds;
    for (int k = 0; k < 3; ++k) {
      const int r = 2 + 10 * k, c = 3 + 7 * k;
      gts.push_back(box(r, c, r + 6 + k, c + 8));
      preds.push_back(box(r + shift(rng), c + shift(rng), r + 6 + k + shift(rng), c + 8));
    }
    std::shuffle(preds.begin(), preds.end(), rng);
    std::vector<double> ious;
    for (const auto& p : preds)
      for (const auto& g : gts) ious.push_back(oracle::iou(p, g));
    std::vector<double> above;
    for (double v : ious)
      if (v >= 0.5) above.push_back(v);
    std::sort(above.begin(), above.end());
    if (above.size() != 3 || std::adjacent_find(above.begin(), above.end()) != above.end()) continue;
    std::vector<int> perm;
    const double best = exhaustive_best(preds, gts, &perm);
    const auto m = match(preds, gts);
    double total = 0;
    for (const auto& pr : m.tp) {
      total += pr.iou;
      EXPECT_EQ(perm[pr.pred], pr.gt);
    }
    EXPECT_NEAR(total, best, 1e-12);
    ++checked;
  }
  EXPECT_GE(checked, 20);
}

TEST(Metrics, SingleTp) {
  MatchCounts c;
  c.tp = 1;
  c.iou_sum = 0.8;
  const auto m = compute_metrics(c);
  EXPECT_DOUBLE_EQ(m.p, 1);
  EXPECT_DOUBLE_EQ(m.r, 1);
  EXPECT_DOUBLE_EQ(m.f, 1);
  EXPECT_DOUBLE_EQ(m.t, 0.8);
  EXPECT_DOUBLE_EQ(m.pq, 0.8);
}

TEST(Metrics, EmptyVsEmptyIsPerfect) {
  const auto m = compute_metrics(MatchCounts{});
  EXPECT_EQ(m.pq, 1);
  EXPECT_EQ(m.f, 1);
  EXPECT_EQ(m.p, 1);
  EXPECT_EQ(m.r, 1);
  EXPECT_EQ(m.t, 1);
}

TEST(Metrics, PublishedTableIdentities) {
  EXPECT_NEAR(100 * pq_from_f_t(0.6151, 0.7838), 48.21, 0.01);
  EXPECT_NEAR(100 * pq_from_f_t(0.8183, 0.7711), 63.10, 0.01);
  EXPECT_NEAR(100 * pq_from_f_t(0.7539, 0.7802), 58.82, 0.01);
  EXPECT_NEAR(100 * f_from_p_r(0.6754, 0.5647), 61.51, 0.01);
}

TEST(Metrics, IdentitiesOnRandomCounts) {
  std::mt19937 rng(2);
  std::uniform_int_distribution<int> n(0, 50);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  for (int i = 0; i < 1000; ++i) {
    MatchCounts c;
    c.tp = n(rng), c.fp = n(rng), c.fn = n(rng);
    for (int k = 0; k < c.tp; ++k) c.iou_sum += u(rng);
    const auto m = compute_metrics(c);
    const double denom = c.tp + 0.5 * c.fp + 0.5 * c.fn;
    if (denom == 0) continue;
    EXPECT_NEAR(m.pq, c.iou_sum / denom, 1e-12);
    EXPECT_NEAR(m.pq, m.f * m.t, 1e-12);
    if (m.p + m.r > 0) EXPECT_NEAR(m.f, 2 * m.p * m.r / (m.p + m.r), 1e-12);
  }
}

TEST(Metrics, PermutationInvariantAndDuplicatePenalty) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    auto gts = oracle::random_rect_masks(rng, 5, 32);
    auto preds = gts;
    preds.pop_back();
    preds.push_back(oracle::random_rect_masks(rng, 1, 32)[0]);
    const auto base = compute_metrics(match(preds, gts));
    auto shuffled = preds;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto perm = compute_metrics(match(shuffled, gts));
    EXPECT_NEAR(base.pq, perm.pq, 1e-12);
    EXPECT_NEAR(base.f, perm.f, 1e-12);
    auto dup = preds;
    dup.push_back(preds[0]);
    const auto d = compute_metrics(match(dup, gts));
    EXPECT_LT(d.p, base.p);
    EXPECT_LT(d.pq, base.pq);
    EXPECT_DOUBLE_EQ(d.r, base.r);
  }
}

HierSample two_paragraphs() {
  SceneSpec s;
  s.seed = 3;
  s.paragraphs = {2, 2};
  return generate(s);
}

DetectionSet clustered(const HierSample& gt, bool merge) {
  DetectionSet d;
  for (std::size_t l = 0; l < gt.lines.size(); ++l) {
    Detection det;
    det.granularity = Granularity::kWordGroup;
    det.mask = word_group_mask(gt, l, gt.height, gt.width, 1.0);
    det.cluster = merge ? 0 : gt.paragraph_index_of_line(gt.lines[l].id);
    d.word_groups.push_back(det);
  }
  d.num_clusters = merge ? 1 : static_cast<int>(gt.paragraphs.size());
  return d;
}

TEST(Layout, PerfectClusteringIsExact) {
  const auto gt = two_paragraphs();
  ASSERT_EQ(gt.paragraphs.size(), 2u);
  const auto m = compute_metrics(eval_layout(clustered(gt, false), gt));
  EXPECT_DOUBLE_EQ(m.f, 1.0);
  EXPECT_DOUBLE_EQ(m.pq, 1.0);
}

TEST(Layout, MergingParagraphsLowersF) {
  const auto gt = two_paragraphs();
  const auto split = compute_metrics(eval_layout(clustered(gt, false), gt));
  const auto merged_match = eval_layout(clustered(gt, true), gt);
  const auto merged = compute_metrics(merged_match);
  EXPECT_LT(merged.f, split.f);
  EXPECT_GE(merged_match.fn, 1);
}

TEST(Layout, EmptyPredictionIsZero) {
  const auto gt = two_paragraphs();
  EXPECT_EQ(compute_metrics(eval_layout(DetectionSet{}, gt)).f, 0.0);
}

TEST(DatasetEvaluator, MicroAverageAndNullLevels) {
  SceneSpec s;
  s.seed = 1;
  const HierSample words = degrade(generate(s), DegradeMode::kWordOnly);
  DetectionSet d;
  d.task = Task::kWord;
  for (std::size_t w = 0; w < words.words.size(); ++w) {
    Detection det;
    det.mask = word_mask(words, w, words.height, words.width, 1.0);
    d.words.push_back(det);
  }
  DatasetEvaluator ev;
  ev.add(d, words);
  ev.add(DetectionSet{}, words);
  EXPECT_EQ(ev.images(EvalLevel::kWord), 2);
  EXPECT_EQ(ev.images(EvalLevel::kLine), 0);
  const auto& c = ev.counts(EvalLevel::kWord);
  EXPECT_EQ(c.tp, static_cast<std::int64_t>(words.words.size()));
  EXPECT_EQ(c.fn, static_cast<std::int64_t>(words.words.size()));
  const auto j = nlohmann::json::parse(ev.to_json());
  EXPECT_TRUE(j["line"].is_null());
  EXPECT_TRUE(j["layout"].is_null());
  EXPECT_NEAR(j["word"]["R"].get<double>(), 50.0, 1e-9);
}

}  // namespace
}  // namespace etsam
