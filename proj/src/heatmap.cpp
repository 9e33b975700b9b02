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
#include "etsam/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>

namespace etsam {

namespace {

Heatmap empty_heatmap(int image_height, int image_width, int stride) {
  if (image_height % stride || image_width % stride) {
    throw std::invalid_argument("heatmap: image size " + std::to_string(image_width) + "x" +
                                std::to_string(image_height) + " not divisible by " +
                                std::to_string(stride));
  }
  return Heatmap{Grid<double>(image_height / stride, image_width / stride, 0.0), stride};
}

struct Window {
  int r0, r1, c0, c1;  // inclusive
};

Window window_for(const Grid<double>& g, double px, double py, double radius) {
  if (radius <= 0) return {0, g.rows() - 1, 0, g.cols() - 1};
  return {std::max(0, static_cast<int>(std::ceil(py - radius))),
          std::min(g.rows() - 1, static_cast<int>(std::floor(py + radius))),
          std::max(0, static_cast<int>(std::ceil(px - radius))),
          std::min(g.cols() - 1, static_cast<int>(std::floor(px + radius)))};
}

}  // namespace

double isotropic_kernel(double x, double y, double px, double py, double sigma) {
  const double dx = x - px, dy = y - py;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

double anisotropic_kernel(double x, double y, double px, double py, double sigma_w,
                          double sigma_h, double theta) {
  const double dx = x - px, dy = y - py;
  const double c = std::cos(theta), s = std::sin(theta);
  const double along = dx * c + dy * s;
  const double across = dx * s - dy * c;
  return std::exp(-(along * along / (2.0 * sigma_w * sigma_w) +
                    across * across / (2.0 * sigma_h * sigma_h)));
}

void splat_isotropic(Grid<double>& grid, double px, double py, double sigma, double truncate) {
  const Window w = window_for(grid, px, py, truncate * sigma);
  for (int r = w.r0; r <= w.r1; ++r) {
    for (int c = w.c0; c <= w.c1; ++c) {
      grid(r, c) = std::max(grid(r, c), isotropic_kernel(c, r, px, py, sigma));
    }
  }
}

void splat_anisotropic(Grid<double>& grid, double px, double py, double sigma_w, double sigma_h,
                       double theta, double truncate) {
  const Window w = window_for(grid, px, py, truncate * std::max(sigma_w, sigma_h));
  for (int r = w.r0; r <= w.r1; ++r) {
    for (int c = w.c0; c <= w.c1; ++c) {
      grid(r, c) =
          std::max(grid(r, c), anisotropic_kernel(c, r, px, py, sigma_w, sigma_h, theta));
    }
  }
}

Heatmap centerline_heatmap(std::span<const WordAnn> words, int image_height, int image_width,
                           const HeatmapConfig& cfg) {
  Heatmap h = empty_heatmap(image_height, image_width, kHeatmapStride);
  const double stride = h.stride;
  for (const auto& w : words) {
    const auto cl = center_line(w.polygon, cfg.spacing_cells * stride);
    for (const auto& cp : cl.points) {
      const double px = std::floor(cp.p.x / stride);
      const double py = std::floor(cp.p.y / stride);
      const double sigma = std::max(cfg.beta * cp.width / stride, cfg.sigma_min);
      splat_isotropic(h.values, px, py, sigma, cfg.truncate);
    }
  }
  return h;
}

Heatmap centerpoint_heatmap(std::span<const WordAnn> words, int image_height, int image_width,
                            const HeatmapConfig& cfg) {
  Heatmap h = empty_heatmap(image_height, image_width, kHeatmapStride);
  const double stride = h.stride;
  for (const auto& w : words) {
    const OrientedRect r = min_bounding_rect(w.polygon).rect;
    const double px = std::floor(r.center.x / stride);
    const double py = std::floor(r.center.y / stride);
    const double sw = std::max(cfg.kappa * r.width / stride, cfg.sigma_min);
    const double sh = std::max(cfg.kappa * r.height / stride, cfg.sigma_min);
    splat_anisotropic(h.values, px, py, sw, sh, r.angle, cfg.truncate);
  }
  return h;
}

Mask dilate(const Mask& m, int radius) {
  if (radius <= 0) return m;
  // Separable: a square dilation is a row pass followed by a column pass.
  Mask rows_pass(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!m(r, c)) continue;
      for (int cc = std::max(0, c - radius); cc <= std::min(m.cols() - 1, c + radius); ++cc) {
        rows_pass(r, cc) = 1;
      }
    }
  }
  Mask out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      if (!rows_pass(r, c)) continue;
      for (int rr = std::max(0, r - radius); rr <= std::min(m.rows() - 1, r + radius); ++rr) {
        out(rr, c) = 1;
      }
    }
  }
  return out;
}

Heatmap refine_pseudo_heatmap(const Heatmap& pred, std::span<const LineAnn> lines, int dilation) {
  Mask support(pred.rows(), pred.cols());
  const double scale = 1.0 / pred.stride;
  for (const auto& l : lines) {
    mask_union_into(support, rasterize(l.polygon, pred.rows(), pred.cols(), scale).mask);
  }
  support = dilate(support, dilation);
  Heatmap out = pred;
  auto v = out.values.values();
  const auto s = support.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!s[i]) v[i] = 0.0;
  }
  return out;
}

void save_heatmap_png(const std::filesystem::path& path, const Grid<double>& h) {
  cv::Mat img(h.rows(), h.cols(), CV_8UC1);
  for (int r = 0; r < h.rows(); ++r) {
    for (int c = 0; c < h.cols(); ++c) {
      const double v = std::clamp(h(r, c), 0.0, 1.0);
      img.at<std::uint8_t>(r, c) = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  }
  if (!cv::imwrite(path.string(), img)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace etsam
