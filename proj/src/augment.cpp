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
#include "etsam/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <opencv2/imgproc.hpp>

namespace etsam {

namespace {

Polygon map_polygon(const cv::Matx23d& m, const Polygon& poly) {
  Polygon out;
  out.points.reserve(poly.points.size());
  for (const auto& p : poly.points) out.points.push_back(apply_affine(m, p));
  return out;
}

bool on_canvas(Point p, int width, int height) {
  return p.x >= 0 && p.y >= 0 && p.x < width && p.y < height;
}

void jitter(cv::Mat& img, const AugmentParams& p) {
  const cv::Scalar mean = cv::mean(img);
  const double m = (mean[0] + mean[1] + mean[2]) / 3.0;
  img = (img - cv::Scalar::all(m)) * p.contrast + cv::Scalar::all(m + p.brightness);
  cv::Mat gray;
  cv::cvtColor(img, gray, cv::COLOR_RGB2GRAY);
  cv::Mat gray3;
  cv::cvtColor(gray, gray3, cv::COLOR_GRAY2RGB);
  img = gray3 + (img - gray3) * p.saturation;
  cv::min(cv::max(img, 0.0), 1.0, img);
}

}  // namespace

AugmentParams random_augment(std::mt19937_64& rng, const AugmentConfig& cfg) {
  auto uni = [&rng](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  AugmentParams p;
  p.brightness = uni(-cfg.brightness, cfg.brightness);
  p.contrast = uni(1 - cfg.contrast, 1 + cfg.contrast);
  p.saturation = uni(1 - cfg.saturation, 1 + cfg.saturation);
  p.angle = uni(-cfg.max_angle_deg, cfg.max_angle_deg) * std::numbers::pi / 180.0;
  // log-uniform so shrinking and enlarging are equally likely
  p.scale = std::exp(uni(std::log(cfg.scale_min), std::log(cfg.scale_max)));
  return p;
}

cv::Matx23d augment_affine(const AugmentParams& p, double width, double height) {
  const double c = std::cos(p.angle) * p.scale, s = std::sin(p.angle) * p.scale;
  const double cx = width / 2, cy = height / 2;
  // y points down, so a visually counter-clockwise turn uses -s in x.
  return cv::Matx23d(c, s, cx - c * cx - s * cy,
                     -s, c, cy + s * cx - c * cy);
}

Point apply_affine(const cv::Matx23d& m, Point p) {
  return {m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2), m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)};
}

Augmented augment(const HierSample& sample, const Heatmap& heat, const AugmentParams& p) {
  Augmented out{sample, heat};
  HierSample& s = out.sample;
  if (!p.color_identity() && !s.image.empty()) {
    s.image = sample.image.clone();
    jitter(s.image, p);
  }
  if (p.geometric_identity()) return out;

  const cv::Matx23d m = augment_affine(p, s.width, s.height);
  if (!s.image.empty()) {
    cv::Mat warped;
    cv::warpAffine(s.image, warped, cv::Mat(m), s.image.size(), cv::INTER_LINEAR,
                   cv::BORDER_CONSTANT, cv::Scalar::all(0));
    s.image = warped;
  }

  std::set<int> kept_words, kept_lines;
  std::vector<WordAnn> words;
  for (const auto& w : sample.words) {
    WordAnn nw{w.id, map_polygon(m, w.polygon)};
    if (on_canvas(centroid(nw.polygon), s.width, s.height)) {
      kept_words.insert(w.id);
      words.push_back(std::move(nw));
    }
  }
  std::vector<LineAnn> lines;
  for (const auto& l : sample.lines) {
    LineAnn nl{l.id, map_polygon(m, l.polygon), {}};
    if (!on_canvas(centroid(nl.polygon), s.width, s.height)) continue;
    for (int id : l.word_ids) {
      if (kept_words.count(id)) nl.word_ids.push_back(id);
    }
    // A line that lost every word is no longer a consistent multi-level entity.
    if (!l.word_ids.empty() && nl.word_ids.empty()) continue;
    kept_lines.insert(l.id);
    lines.push_back(std::move(nl));
  }
  std::vector<ParagraphAnn> paras;
  for (const auto& pa : sample.paragraphs) {
    ParagraphAnn np{pa.id, std::nullopt, {}};
    if (pa.polygon) {
      np.polygon = map_polygon(m, *pa.polygon);
      if (!on_canvas(centroid(*np.polygon), s.width, s.height)) continue;
    }
    for (int id : pa.line_ids) {
      if (kept_lines.count(id)) np.line_ids.push_back(id);
    }
    if (np.line_ids.empty()) continue;
    paras.push_back(std::move(np));
  }
  s.words = std::move(words);
  s.lines = std::move(lines);
  s.paragraphs = std::move(paras);

  // Same transform in cell units: cell u sits at input pixel stride * u.
  const double k = 1.0 / heat.stride;
  cv::Matx23d mc = m;
  mc(0, 2) *= k;
  mc(1, 2) *= k;
  cv::Mat src(heat.rows(), heat.cols(), CV_64F, const_cast<double*>(heat.values.data()));
  cv::Mat dst;
  cv::warpAffine(src, dst, cv::Mat(mc), src.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT,
                 cv::Scalar::all(0));
  for (int r = 0; r < heat.rows(); ++r) {
    for (int c = 0; c < heat.cols(); ++c) {
      out.heat.values(r, c) = std::clamp(dst.at<double>(r, c), 0.0, 1.0);
    }
  }
  return out;
}

double letterbox_scale(int width, int height, int size) {
  return static_cast<double>(size) / std::max(width, height);
}

HierSample letterbox(const HierSample& sample, int size) {
  if (sample.width == size && sample.height == size) return sample;
  const double k = letterbox_scale(sample.width, sample.height, size);
  HierSample s = sample;
  s.width = size;
  s.height = size;
  if (!sample.image.empty()) {
    const int w = std::max(1, static_cast<int>(std::lround(sample.image.cols * k)));
    const int h = std::max(1, static_cast<int>(std::lround(sample.image.rows * k)));
    cv::Mat resized;
    cv::resize(sample.image, resized, cv::Size(std::min(w, size), std::min(h, size)), 0, 0,
               cv::INTER_AREA);
    s.image = cv::Mat::zeros(size, size, CV_32FC3);
    resized.copyTo(s.image(cv::Rect(0, 0, resized.cols, resized.rows)));
  }
  for (auto& w : s.words) w.polygon = scaled(w.polygon, k);
  for (auto& l : s.lines) l.polygon = scaled(l.polygon, k);
  for (auto& p : s.paragraphs) {
    if (p.polygon) p.polygon = scaled(*p.polygon, k);
  }
  return s;
}

}  // namespace etsam
