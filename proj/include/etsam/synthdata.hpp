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
#include <string>
#include <vector>

#include "etsam/annotations.hpp"

namespace etsam {

struct IntRange {
  int min = 1;
  int max = 1;
};

// Parameters of one synthetic hierarchical text scene.
struct SceneSpec {
  std::uint64_t seed = 0;
  int width = 256;
  int height = 256;
  IntRange paragraphs{1, 2};
  IntRange lines_per_paragraph{1, 3};
  IntRange words_per_line{2, 4};
  IntRange word_height{14, 20};  // px
  IntRange word_width{28, 56};   // px
  bool curvature = false;
  double clutter_density = 0.5;  // distractor strokes per 10k px of background

  void validate() const;
  std::string describe() const;
};

// Renders glyph-like strokes into packed word boxes and returns the scene with
// exact word/line/paragraph polygons (task multi). Deterministic per seed.
HierSample generate(const SceneSpec& spec);

enum class DegradeMode { kWordOnly, kLineOnly };

// Strips annotation levels to emulate single-level datasets.
HierSample degrade(const HierSample& sample, DegradeMode mode);

std::string synth_image_id(std::uint64_t seed);

}  // namespace etsam
