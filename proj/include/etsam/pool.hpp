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
#include <vector>

#include "etsam/annotations.hpp"

namespace etsam {

struct BatchItem {
  Task task = Task::kMulti;
  std::size_t index = 0;  // position in the category's set
  const HierSample* sample = nullptr;
};

// Joint training pool: the multi-level, word-only and line-only sets run in
// parallel, each reshuffled per epoch with seed + epoch. The epoch length is
// the largest set; shorter sets wrap around cyclically.
class DataPool {
 public:
  // With allow_missing, empty categories are skipped in every batch instead of
  // raising.
  DataPool(std::vector<HierSample> multi, std::vector<HierSample> word,
           std::vector<HierSample> line, std::uint64_t seed, bool allow_missing = true);

  std::size_t epoch_length() const { return epoch_length_; }
  const std::vector<HierSample>& set(Task t) const { return sets_[task_index(t)]; }
  std::vector<HierSample>& mutable_set(Task t) { return sets_[task_index(t)]; }
  std::uint64_t seed() const { return seed_; }

  // Index permutation of one category for an epoch.
  std::vector<std::size_t> order(Task t, std::uint64_t epoch) const;

  // One sample per present category, in task order.
  std::vector<BatchItem> batch(std::uint64_t epoch, std::size_t i) const;
  // Batch at a global step (epoch = step / epoch_length).
  std::vector<BatchItem> batch_at(std::uint64_t step) const;

 private:
  std::array<std::vector<HierSample>, kNumTasks> sets_;
  std::uint64_t seed_;
  std::size_t epoch_length_ = 0;
  mutable std::uint64_t cached_epoch_ = UINT64_MAX;
  mutable std::array<std::vector<std::size_t>, kNumTasks> cached_order_;
};

}  // namespace etsam
