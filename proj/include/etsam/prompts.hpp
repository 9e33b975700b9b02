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
#include <random>
#include <vector>

#include "etsam/annotations.hpp"
#include "etsam/heatmap.hpp"

namespace etsam {

struct PromptConfig {
  int max_prompts = 10;
  int points_per_prompt = 2;
  int max_points = 20;
  double peak_floor = 0.5;  // heatmap maxima below this are ignored
};

// Supervision for one image: up to max_prompts prompts of 1..points_per_prompt
// points each, and the GT mask of every granularity the sample carries.
struct PromptSet {
  std::vector<std::vector<Point>> points;  // input pixels
  std::vector<int> word_index;             // -1 when not applicable
  std::vector<int> line_index;             // -1 when not applicable
  // Indexed by Granularity; either empty (absent level) or one mask per prompt.
  // Word / word-group masks live on the high-res grid, line / paragraph masks
  // on the heatmap grid.
  std::array<std::vector<Mask>, kNumGranularities> masks;

  std::size_t size() const { return points.size(); }
  std::size_t total_points() const;
  bool has(Granularity g) const { return !masks[static_cast<int>(g)].empty(); }
};

struct PromptGrids {
  int input_size = 1024;  // S; samples are expected at S x S
  int heatmap_grid() const { return input_size / 4; }
  int highres_grid() const { return heatmap_grid() * 3 / 2; }
};

// Cells of `heat` that equal their 3x3 neighbourhood max and exceed `floor`.
std::vector<std::pair<int, int>> heatmap_maxima(const Grid<double>& heat, double floor);

// Task 0: up to 10 lines, one random word of each line's group, points from
// heatmap maxima inside that word. Tasks 1/2: up to 10 words / lines with
// points from maxima inside each mask. A mask with no maxima gets its pixel
// nearest the centroid. Every point lies inside its prompt mask at full
// resolution.
PromptSet sample_prompts(const HierSample& sample, const Heatmap& heat, std::mt19937_64& rng,
                         const PromptGrids& grids, const PromptConfig& cfg = {});

}  // namespace etsam
