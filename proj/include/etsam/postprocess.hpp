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
#include <span>
#include <vector>

#include "etsam/annotations.hpp"
#include "etsam/geometry.hpp"
#include "etsam/grid.hpp"

namespace etsam {

struct Detection {
  Mask mask;
  double score = 0.0;
  Granularity granularity = Granularity::kWord;
  int source_point = -1;
  int cluster = -1;  // -1 when no layout cluster is assigned
};

struct DetectionSet {
  Task task = Task::kMulti;
  std::vector<Detection> words;
  std::vector<Detection> word_groups;
  std::vector<Detection> lines;
  std::vector<Detection> paragraphs;
  int num_clusters = 0;

  std::vector<Detection>& of(Granularity g);
  const std::vector<Detection>& of(Granularity g) const;
  std::size_t total() const {
    return words.size() + word_groups.size() + lines.size() + paragraphs.size();
  }
};

struct Peak {
  Point point;  // input pixels: stride * cell + stride / 2
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct PeakConfig {
  int stride = 4;
  std::size_t max_points = 2000;
};

// Cells equal to their 3x3 max-pool and strictly above `threshold`. Each
// 8-connected plateau of such cells contributes only its first cell in
// row-major order. Output is row-major. Above max_points, the highest values
// are kept and a warning is logged.
std::vector<Peak> extract_peaks(const Grid<double>& heat, double threshold,
                                const PeakConfig& cfg = {});

// Pairwise mask IoU, symmetric with unit diagonal.
Grid<double> iou_matrix(std::span<const Mask> masks);

enum class DecayKernel { kGaussian, kLinear };

struct MatrixNmsConfig {
  double threshold = 0.5;  // cutoff on decayed scores
  double sigma = 2.0;
  DecayKernel kernel = DecayKernel::kGaussian;
};

struct NmsResult {
  std::vector<int> kept;        // original indices, by descending score
  std::vector<double> decayed;  // decayed score per original index
};

// Matrix NMS: each score is decayed by the strongest suppression from any
// higher-ranked mask, compensated by how suppressed that mask is itself.
NmsResult matrix_nms(std::span<const Mask> masks, std::span<const double> scores,
                     const MatrixNmsConfig& cfg = {});
NmsResult matrix_nms(const Grid<double>& ious, std::span<const double> scores,
                     const MatrixNmsConfig& cfg = {});

class UnionFind {
 public:
  explicit UnionFind(std::size_t n);
  int find(int x);
  // Returns true when x and y were in different sets.
  bool unite(int x, int y);
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

struct ClusterResult {
  std::vector<int> root;   // union-find root per element
  std::vector<int> label;  // compact ids 0..count-1 in order of first appearance
  int count = 0;
};

// Unions i and j whenever ious(i, j) > tau.
ClusterResult cluster_by_iou(const Grid<double>& ious, double tau);
ClusterResult layout_cluster(std::span<const Mask> paragraph_masks, double tau = 0.5);

}  // namespace etsam
