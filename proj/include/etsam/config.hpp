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

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "etsam/inference.hpp"
#include "etsam/model.hpp"
#include "etsam/synthdata.hpp"
#include "etsam/trainer.hpp"

namespace etsam {

inline constexpr int kConfigVersion = 1;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered "key = value" pairs; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text, const std::string& origin = "<string>");
KeyValues read_key_values(const std::filesystem::path& path);
// "key=value" override; throws ConfigError when malformed.
std::pair<std::string, std::string> parse_override(const std::string& s);

struct DataSource {
  std::filesystem::path annotations;  // HierText-style JSON
  std::filesystem::path images;       // <image_id>.png; default <json dir>/images or <json dir>
};

struct RunConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  ModelConfig model = ModelConfig::toy();
  TrainConfig train;
  InferenceConfig infer;
  double eval_iou = 0.5;
  std::optional<DataSource> multi, word, line;

  // Thresholds in (0, 1), positive sizes, readable data paths.
  void validate(bool check_paths = true) const;
  std::string describe() const;
};

// Applies keys on top of the defaults. `version` is mandatory; unknown keys
// raise ConfigError naming the key.
RunConfig run_config_from(const KeyValues& kv, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});

struct DataSpec {
  SceneSpec scene;  // seed is the base seed
  int multi = 8;
  int word_only = 0;
  int line_only = 0;
};

DataSpec data_spec_from(const KeyValues& kv);

// ETSAM_SEED when set and numeric.
std::optional<std::uint64_t> seed_from_env();

}  // namespace etsam
