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
#include "etsam/prompts.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace etsam {

namespace {

// Random subset of at most k elements of [0, n).
std::vector<int> pick(int n, int k, std::mt19937_64& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  if (static_cast<int>(idx.size()) > k) idx.resize(k);
  return idx;
}

// Points for one prompt mask given at full input resolution.
std::vector<Point> points_in_mask(const Mask& full, const std::vector<std::pair<int, int>>& maxima,
                                  int stride, int max_points, std::mt19937_64& rng) {
  std::vector<Point> inside;
  for (const auto& [r, c] : maxima) {
    const int y = stride * r + stride / 2, x = stride * c + stride / 2;
    if (y < full.rows() && x < full.cols() && full(y, x)) {
      inside.push_back({static_cast<double>(x), static_cast<double>(y)});
    }
  }
  if (!inside.empty()) {
    std::shuffle(inside.begin(), inside.end(), rng);
    if (static_cast<int>(inside.size()) > max_points) inside.resize(max_points);
    return inside;
  }
  // Fallback: the mask pixel closest to the mask centroid.
  double sx = 0, sy = 0;
  std::size_t n = 0;
  for (int r = 0; r < full.rows(); ++r) {
    for (int c = 0; c < full.cols(); ++c) {
      if (full(r, c)) sx += c + 0.5, sy += r + 0.5, ++n;
    }
  }
  if (n == 0) return {};
  const Point m{sx / n, sy / n};
  double best = std::numeric_limits<double>::infinity();
  Point out;
  for (int r = 0; r < full.rows(); ++r) {
    for (int c = 0; c < full.cols(); ++c) {
      if (!full(r, c)) continue;
      const Point p{c + 0.5, r + 0.5};
      const double d = distance(p, m);
      if (d < best) best = d, out = p;
    }
  }
  return {out};
}

}  // namespace

std::size_t PromptSet::total_points() const {
  std::size_t n = 0;
  for (const auto& p : points) n += p.size();
  return n;
}

std::vector<std::pair<int, int>> heatmap_maxima(const Grid<double>& heat, double floor) {
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r < heat.rows(); ++r) {
    for (int c = 0; c < heat.cols(); ++c) {
      const double v = heat(r, c);
      if (!(v > floor)) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (heat.contains(rr, cc) && heat(rr, cc) > v) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) out.emplace_back(r, c);
    }
  }
  return out;
}

PromptSet sample_prompts(const HierSample& s, const Heatmap& heat, std::mt19937_64& rng,
                         const PromptGrids& grids, const PromptConfig& cfg) {
  const int size = grids.input_size;
  if (s.width != size || s.height != size) {
    throw std::invalid_argument("sample_prompts: sample " + s.image_id + " is " +
                                std::to_string(s.width) + "x" + std::to_string(s.height) +
                                ", expected " + std::to_string(size) + "x" +
                                std::to_string(size));
  }
  const int lo = grids.heatmap_grid(), hi = grids.highres_grid();
  const double lo_scale = static_cast<double>(lo) / size;
  const double hi_scale = static_cast<double>(hi) / size;
  const auto maxima = heatmap_maxima(heat.values, cfg.peak_floor);

  PromptSet out;
  auto& word_masks = out.masks[static_cast<int>(Granularity::kWord)];
  auto& group_masks = out.masks[static_cast<int>(Granularity::kWordGroup)];
  auto& line_masks = out.masks[static_cast<int>(Granularity::kLine)];
  auto& para_masks = out.masks[static_cast<int>(Granularity::kParagraph)];

  auto add = [&](std::vector<Point> pts, int wi, int li) {
    if (pts.empty()) return false;
    if (out.total_points() + pts.size() > static_cast<std::size_t>(cfg.max_points)) return false;
    out.points.push_back(std::move(pts));
    out.word_index.push_back(wi);
    out.line_index.push_back(li);
    return true;
  };

  if (s.task == Task::kMulti) {
    std::vector<int> candidates;
    for (std::size_t i = 0; i < s.lines.size(); ++i) {
      if (!s.lines[i].word_ids.empty()) candidates.push_back(static_cast<int>(i));
    }
    for (int k : pick(static_cast<int>(candidates.size()), cfg.max_prompts, rng)) {
      const int li = candidates[k];
      const auto& ids = s.lines[li].word_ids;
      const int word_id = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
      int wi = -1;
      for (std::size_t j = 0; j < s.words.size(); ++j) {
        if (s.words[j].id == word_id) wi = static_cast<int>(j);
      }
      const Mask full = word_mask(s, wi, size, size, 1.0);
      if (!add(points_in_mask(full, maxima, heat.stride, cfg.points_per_prompt, rng), wi, li)) {
        continue;
      }
      word_masks.push_back(word_mask(s, wi, hi, hi, hi_scale));
      group_masks.push_back(word_group_mask(s, li, hi, hi, hi_scale));
      line_masks.push_back(line_mask(s, li, lo, lo, lo_scale));
      const int pi = s.paragraph_index_of_line(s.lines[li].id);
      para_masks.push_back(pi >= 0 ? paragraph_mask(s, pi, lo, lo, lo_scale)
                                   : line_mask(s, li, lo, lo, lo_scale));
    }
  } else if (s.task == Task::kWord) {
    for (int wi : pick(static_cast<int>(s.words.size()), cfg.max_prompts, rng)) {
      const Mask full = word_mask(s, wi, size, size, 1.0);
      if (!add(points_in_mask(full, maxima, heat.stride, cfg.points_per_prompt, rng), wi, -1)) {
        continue;
      }
      word_masks.push_back(word_mask(s, wi, hi, hi, hi_scale));
    }
  } else {
    for (int li : pick(static_cast<int>(s.lines.size()), cfg.max_prompts, rng)) {
      const Mask full = line_mask(s, li, size, size, 1.0);
      if (!add(points_in_mask(full, maxima, heat.stride, cfg.points_per_prompt, rng), -1, li)) {
        continue;
      }
      line_masks.push_back(line_mask(s, li, lo, lo, lo_scale));
    }
  }
  return out;
}

}  // namespace etsam
