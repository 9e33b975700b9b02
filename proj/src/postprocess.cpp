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
#include "etsam/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace etsam {

std::vector<Detection>& DetectionSet::of(Granularity g) {
  switch (g) {
    case Granularity::kWord: return words;
    case Granularity::kWordGroup: return word_groups;
    case Granularity::kLine: return lines;
    case Granularity::kParagraph: return paragraphs;
  }
  throw std::invalid_argument("bad granularity");
}

const std::vector<Detection>& DetectionSet::of(Granularity g) const {
  return const_cast<DetectionSet*>(this)->of(g);
}

std::vector<Peak> extract_peaks(const Grid<double>& heat, double threshold,
                                const PeakConfig& cfg) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("extract_peaks: threshold must be in (0, 1)");
  }
  const int rows = heat.rows(), cols = heat.cols();
  Grid<std::uint8_t> cand(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double v = heat(r, c);
      if (!(v > threshold)) continue;
      bool is_max = true;
      for (int dr = -1; dr <= 1 && is_max; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (heat.contains(r + dr, c + dc) && heat(r + dr, c + dc) > v) {
            is_max = false;
            break;
          }
        }
      }
      cand(r, c) = is_max;
    }
  }

  // Adjacent candidates are necessarily equal, so 8-connected candidate
  // components are plateaus. Scan order visits each one's smallest cell first.
  std::vector<Peak> peaks;
  Grid<std::uint8_t> seen(rows, cols);
  std::vector<std::pair<int, int>> stack;
  const double half = cfg.stride / 2.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!cand(r, c) || seen(r, c)) continue;
      peaks.push_back({{cfg.stride * c + half, cfg.stride * r + half}, r, c, heat(r, c)});
      seen(r, c) = 1;
      stack.assign(1, {r, c});
      while (!stack.empty()) {
        auto [cr, cc] = stack.back();
        stack.pop_back();
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = cr + dr, nc = cc + dc;
            if (cand.contains(nr, nc) && cand(nr, nc) && !seen(nr, nc)) {
              seen(nr, nc) = 1;
              stack.push_back({nr, nc});
            }
          }
        }
      }
    }
  }

  if (peaks.size() > cfg.max_points) {
    std::clog << "warning: " << peaks.size() << " heatmap peaks exceed the cap of "
              << cfg.max_points << "; keeping the strongest\n";
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak& a, const Peak& b) { return a.value > b.value; });
    peaks.resize(cfg.max_points);
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
      return a.row < b.row || (a.row == b.row && a.col < b.col);
    });
  }
  return peaks;
}

namespace {

struct MaskStats {
  std::int64_t area = 0;
  int r0 = 0, r1 = -1, c0 = 0, c1 = -1;
};

MaskStats stats_of(const Mask& m) {
  MaskStats s;
  s.r0 = m.rows(), s.c0 = m.cols();
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c)) continue;
      ++s.area;
      s.r0 = std::min(s.r0, r), s.r1 = std::max(s.r1, r);
      s.c0 = std::min(s.c0, c), s.c1 = std::max(s.c1, c);
    }
  }
  return s;
}

}  // namespace

Grid<double> iou_matrix(std::span<const Mask> masks) {
  const std::size_t n = masks.size();
  Grid<double> out(static_cast<int>(n), static_cast<int>(n), 0.0);
  std::vector<MaskStats> st;
  st.reserve(n);
  for (const auto& m : masks) {
    if (!m.same_shape(masks[0])) throw std::invalid_argument("iou_matrix: shape mismatch");
    st.push_back(stats_of(m));
  }
  for (std::size_t i = 0; i < n; ++i) {
    out(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const int r0 = std::max(st[i].r0, st[j].r0), r1 = std::min(st[i].r1, st[j].r1);
      const int c0 = std::max(st[i].c0, st[j].c0), c1 = std::min(st[i].c1, st[j].c1);
      std::int64_t inter = 0;
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) inter += masks[i](r, c) && masks[j](r, c);
      }
      const std::int64_t uni = st[i].area + st[j].area - inter;
      const double v = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
      out(i, j) = out(j, i) = v;
    }
  }
  return out;
}

NmsResult matrix_nms(std::span<const Mask> masks, std::span<const double> scores,
                     const MatrixNmsConfig& cfg) {
  if (masks.size() != scores.size()) throw std::invalid_argument("matrix_nms: size mismatch");
  return matrix_nms(iou_matrix(masks), scores, cfg);
}

NmsResult matrix_nms(const Grid<double>& ious, std::span<const double> scores,
                     const MatrixNmsConfig& cfg) {
  const std::size_t n = scores.size();
  if (static_cast<std::size_t>(ious.rows()) != n || static_cast<std::size_t>(ious.cols()) != n) {
    throw std::invalid_argument("matrix_nms: IoU matrix does not match score count");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });

  // compensation[k]: max IoU of rank-k mask against anything ranked above it
  std::vector<double> comp(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < k; ++j) comp[k] = std::max(comp[k], ious(order[j], order[k]));
  }

  NmsResult out;
  out.decayed.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double decay = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double iou = ious(order[j], order[k]);
      double d;
      if (cfg.kernel == DecayKernel::kGaussian) {
        d = std::exp(-(iou * iou - comp[j] * comp[j]) / cfg.sigma);
      } else {
        d = (1.0 - iou) / std::max(1.0 - comp[j], 1e-12);
      }
      decay = std::min(decay, d);
    }
    const int i = order[k];
    out.decayed[i] = scores[i] * decay;
    if (out.decayed[i] >= cfg.threshold) out.kept.push_back(i);
  }
  return out;
}

UnionFind::UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
  std::iota(parent_.begin(), parent_.end(), 0);
}

int UnionFind::find(int x) {
  int root = x;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[x] != root) {
    const int next = parent_[x];
    parent_[x] = root;
    x = next;
  }
  return root;
}

bool UnionFind::unite(int x, int y) {
  int a = find(x), b = find(y);
  if (a == b) return false;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
  return true;
}

ClusterResult cluster_by_iou(const Grid<double>& ious, double tau) {
  const int n = ious.rows();
  if (ious.cols() != n) throw std::invalid_argument("cluster_by_iou: IoU matrix must be square");
  UnionFind uf(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (ious(i, j) > tau) uf.unite(i, j);
    }
  }
  ClusterResult out;
  out.root.resize(n);
  out.label.assign(n, -1);
  std::vector<int> label_of_root(n, -1);
  for (int i = 0; i < n; ++i) {
    const int r = uf.find(i);
    out.root[i] = r;
    if (label_of_root[r] < 0) label_of_root[r] = out.count++;
    out.label[i] = label_of_root[r];
  }
  return out;
}

ClusterResult layout_cluster(std::span<const Mask> paragraph_masks, double tau) {
  return cluster_by_iou(iou_matrix(paragraph_masks), tau);
}

}  // namespace etsam
