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
#include "etsam/pool.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace etsam {

DataPool::DataPool(std::vector<HierSample> multi, std::vector<HierSample> word,
                   std::vector<HierSample> line, std::uint64_t seed, bool allow_missing)
    : sets_{std::move(multi), std::move(word), std::move(line)}, seed_(seed) {
  for (const auto& s : sets_) epoch_length_ = std::max(epoch_length_, s.size());
  if (epoch_length_ == 0) throw std::invalid_argument("DataPool: all sets are empty");
  if (!allow_missing) {
    for (int t = 0; t < kNumTasks; ++t) {
      if (sets_[t].empty()) {
        throw std::invalid_argument("DataPool: category " + std::to_string(t) +
                                    " is empty and fallback is disabled");
      }
    }
  }
}

std::vector<std::size_t> DataPool::order(Task t, std::uint64_t epoch) const {
  if (cached_epoch_ != epoch) {
    std::mt19937_64 rng(seed_ + epoch);
    for (int k = 0; k < kNumTasks; ++k) {
      auto& o = cached_order_[k];
      o.resize(sets_[k].size());
      std::iota(o.begin(), o.end(), std::size_t{0});
      std::shuffle(o.begin(), o.end(), rng);
    }
    cached_epoch_ = epoch;
  }
  return cached_order_[task_index(t)];
}

std::vector<BatchItem> DataPool::batch(std::uint64_t epoch, std::size_t i) const {
  if (i >= epoch_length_) throw std::out_of_range("DataPool::batch: index past epoch length");
  std::vector<BatchItem> out;
  for (int k = 0; k < kNumTasks; ++k) {
    if (sets_[k].empty()) continue;
    const Task t = task_from_index(k);
    order(t, epoch);
    const std::size_t idx = cached_order_[k][i % sets_[k].size()];
    out.push_back({t, idx, &sets_[k][idx]});
  }
  return out;
}

std::vector<BatchItem> DataPool::batch_at(std::uint64_t step) const {
  return batch(step / epoch_length_, static_cast<std::size_t>(step % epoch_length_));
}

}  // namespace etsam
