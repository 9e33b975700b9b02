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

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace etsam {

// Dense row-major 2-D array. Rows index y, columns index x.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(check_dim(rows)) * check_dim(cols), fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }

  bool contains(int r, int c) const {
    return r >= 0 && c >= 0 && r < rows_ && c < cols_;
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Grid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  static int check_dim(int d) {
    if (d < 0) throw std::invalid_argument("grid dimension must be >= 0");
    return d;
  }
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * cols_ + c;
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

inline std::int64_t mask_area(const Mask& m) {
  std::int64_t n = 0;
  for (auto v : m.values()) n += v != 0;
  return n;
}

// Intersection over union of two binary masks of equal shape. Two empty
// masks have IoU 1; an empty mask against a non-empty one has IoU 0.
inline double mask_iou(const Mask& a, const Mask& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mask_iou: shape mismatch");
  std::int64_t inter = 0, uni = 0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const bool x = av[i] != 0, y = bv[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline void mask_union_into(Mask& dst, const Mask& src) {
  if (!dst.same_shape(src)) throw std::invalid_argument("mask union: shape mismatch");
  auto d = dst.values();
  const auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (d[i] || s[i]) ? 1 : 0;
}

}  // namespace etsam
