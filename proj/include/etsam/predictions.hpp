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
#include <string>
#include <vector>

#include "etsam/postprocess.hpp"

namespace etsam {

// Run-length encoding over the column-major flattening of a mask. Runs
// alternate background/foreground and always start with a (possibly zero)
// background run.
struct Rle {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> counts;

  friend bool operator==(const Rle&, const Rle&) = default;
};

Rle rle_encode(const Mask& m);
Mask rle_decode(const Rle& rle);

struct PredictionFile {
  std::string image_id;
  Task task = Task::kMulti;
  DetectionSet detections;
};

// {"image_id":..,"task":..,"detections":[{"granularity":..,"score":..,
//   "cluster":int|null,"mask_rle":{"size":[h,w],"counts":[..]}}]}
std::string prediction_to_json(const PredictionFile& pred);
PredictionFile prediction_from_json(const std::string& text);

void write_prediction(const std::filesystem::path& path, const PredictionFile& pred);
PredictionFile read_prediction(const std::filesystem::path& path);

}  // namespace etsam
