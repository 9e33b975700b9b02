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
#include <span>

#include "etsam/annotations.hpp"
#include "etsam/grid.hpp"

namespace etsam {

inline constexpr int kHeatmapStride = 4;

// Word-centric heatmap on a 1/4-resolution grid; values in [0, 1].
struct Heatmap {
  Grid<double> values;
  int stride = kHeatmapStride;

  int rows() const { return values.rows(); }
  int cols() const { return values.cols(); }
};

struct HeatmapConfig {
  double beta = 0.25;       // center-line sigma = beta * local word width / stride
  double kappa = 0.25;      // center-point sigmas = kappa * rect side / stride
  double sigma_min = 0.5;   // cells
  double truncate = 4.0;    // kernel window half-size in sigmas; <= 0 disables
  double spacing_cells = 1.0;
};

// exp(-((x - px)^2 + (y - py)^2) / (2 sigma^2))
double isotropic_kernel(double x, double y, double px, double py, double sigma);

// Rotated kernel: the axis (cos theta, sin theta) uses sigma_w, its normal
// uses sigma_h.
double anisotropic_kernel(double x, double y, double px, double py, double sigma_w,
                          double sigma_h, double theta);

// Max-merge one kernel into `grid` (cells outside the truncation window are
// left untouched).
void splat_isotropic(Grid<double>& grid, double px, double py, double sigma, double truncate);
void splat_anisotropic(Grid<double>& grid, double px, double py, double sigma_w, double sigma_h,
                       double theta, double truncate);

// Gaussian ridges along every word's center line, sampled at one cell
// spacing. Sample points snap to the heatmap cell that contains them, so each
// sampled cell carries exactly 1.
Heatmap centerline_heatmap(std::span<const WordAnn> words, int image_height, int image_width,
                           const HeatmapConfig& cfg = {});

// One anisotropic kernel per word at its minimum bounding rectangle center.
Heatmap centerpoint_heatmap(std::span<const WordAnn> words, int image_height, int image_width,
                            const HeatmapConfig& cfg = {});

// Chebyshev (square) dilation by `radius` cells.
Mask dilate(const Mask& m, int radius);

// Zeroes predicted values outside the union of line masks dilated by
// `dilation` cells; inside values pass through.
Heatmap refine_pseudo_heatmap(const Heatmap& pred, std::span<const LineAnn> lines,
                              int dilation = 2);

// 8-bit grayscale PNG with value round(255 * H).
void save_heatmap_png(const std::filesystem::path& path, const Grid<double>& h);

}  // namespace etsam
