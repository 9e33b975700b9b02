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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "etsam/model.hpp"

namespace etsam {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Container layout (little-endian):
//   "ETSAMCKP" u32 version
//   u64 n + model config JSON, u64 n + metadata JSON, i64 step
//   u32 count, then per array: u32 n + name, u8 dtype, u32 ndim, i64 dims[], raw data
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string config_json;
  std::string meta_json = "{}";
  std::int64_t step = 0;
  std::vector<std::pair<std::string, torch::Tensor>> arrays;

  const torch::Tensor* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Model parameters and buffers under their module paths; AdamW moments under
// "optim.<i>.*" when an optimizer is given.
Checkpoint make_checkpoint(EtSam& model, std::int64_t step,
                           torch::optim::AdamW* optimizer = nullptr,
                           const std::string& meta_json = "{}");

// Copies every model array from the checkpoint; a missing name or a shape
// mismatch raises CheckpointError.
void load_weights(EtSam& model, const Checkpoint& ckpt);
void load_optimizer_state(torch::optim::AdamW& optimizer, const Checkpoint& ckpt);

// Builds a model from the stored config and loads its weights.
EtSam load_model(const std::filesystem::path& path);

}  // namespace etsam
