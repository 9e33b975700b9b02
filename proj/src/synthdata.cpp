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
#include "etsam/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <opencv2/imgproc.hpp>

namespace etsam {

namespace {

constexpr int kMaxPackingAttempts = 1000;
constexpr int kBorder = 4;          // px kept free at the image border
constexpr int kParagraphGap = 12;   // px between paragraph blocks
constexpr int kCurvePoints = 7;     // vertices per side of a curved word

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  int in(IntRange r) { return uniform_int(r.min, r.max); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen_);
  }
  bool coin() { return uniform_int(0, 1) == 1; }

 private:
  std::mt19937_64 gen_;
};

struct WordLayout {
  double x = 0, width = 0;  // relative to the line start
};

struct LineLayout {
  std::vector<WordLayout> words;
  double y = 0;       // top, relative to the block
  double height = 0;  // word height
  double width = 0;
  double bend = 0;    // vertical arc amplitude, 0 when straight
};

struct BlockLayout {
  std::vector<LineLayout> lines;
  double width = 0, height = 0;
};

BlockLayout layout_block(const SceneSpec& spec, Rng& rng) {
  BlockLayout b;
  const int n_lines = rng.in(spec.lines_per_paragraph);
  const double h = rng.in(spec.word_height);
  double y = 0;
  for (int l = 0; l < n_lines; ++l) {
    LineLayout line;
    line.height = h;
    if (spec.curvature) line.bend = (rng.coin() ? 1 : -1) * h * rng.uniform(0.3, 0.7);
    line.y = y + std::max(0.0, -line.bend);
    const int n_words = rng.in(spec.words_per_line);
    double x = rng.uniform(0, h * 0.5);
    for (int w = 0; w < n_words; ++w) {
      if (w > 0) x += h * rng.uniform(0.6, 1.0);
      const double ww = rng.in(spec.word_width);
      line.words.push_back({x, ww});
      x += ww;
    }
    line.width = x;
    const double bottom = line.y + h + std::max(0.0, line.bend);
    b.height = bottom;
    // Curved rows get extra spacing so neighbouring line hulls stay disjoint.
    y = bottom + h * rng.uniform(0.5, 0.8) + std::abs(line.bend);
    b.width = std::max(b.width, line.width);
    b.lines.push_back(std::move(line));
  }
  return b;
}

// Vertical offset of a curved line at horizontal position x.
double arc_offset(const LineLayout& line, double x) {
  if (line.bend == 0 || line.width <= 0) return 0.0;
  return line.bend * std::sin(std::numbers::pi * std::clamp(x / line.width, 0.0, 1.0));
}

Polygon word_polygon(const LineLayout& line, const WordLayout& w, double ox, double oy) {
  const double top = oy + line.y, bottom = top + line.height;
  Polygon p;
  if (line.bend == 0) {
    const double x0 = ox + w.x, x1 = x0 + w.width;
    p.points = {{x0, top}, {x1, top}, {x1, bottom}, {x0, bottom}};
    return p;
  }
  std::vector<Point> upper, lower;
  for (int i = 0; i < kCurvePoints; ++i) {
    const double lx = w.x + w.width * i / (kCurvePoints - 1);
    const double dy = arc_offset(line, lx);
    upper.push_back({ox + lx, top + dy});
    lower.push_back({ox + lx, bottom + dy});
  }
  p.points = upper;
  p.points.insert(p.points.end(), lower.rbegin(), lower.rend());
  return p;
}

cv::Mat render_background(const SceneSpec& spec, Rng& rng, cv::Vec3f& base) {
  cv::Mat img(spec.height, spec.width, CV_32FC3);
  const bool dark = rng.coin();
  base = dark ? cv::Vec3f(rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3), rng.uniform(0.05, 0.3))
              : cv::Vec3f(rng.uniform(0.65, 0.95), rng.uniform(0.65, 0.95), rng.uniform(0.65, 0.95));
  // Low-frequency texture from a few random plane waves.
  struct Wave { double fx, fy, phase, amp; };
  std::vector<Wave> waves;
  for (int i = 0; i < 4; ++i) {
    waves.push_back({rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05),
                     rng.uniform(0, 2 * std::numbers::pi), rng.uniform(0.01, 0.05)});
  }
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      double t = 0;
      for (const auto& w : waves) t += w.amp * std::sin(w.fx * c + w.fy * r + w.phase);
      const cv::Vec3f v = base + cv::Vec3f(t, t, t);
      img.at<cv::Vec3f>(r, c) = v;
    }
  }
  return img;
}

void draw_glyphs(cv::Mat& img, const LineLayout& line, const WordLayout& w,
                 double ox, double oy, const cv::Scalar& color, Rng& rng) {
  const double h = line.height;
  const int n = std::max(1, static_cast<int>(std::lround(w.width / (0.6 * h))));
  const double gw = w.width / n;
  const int thick = std::max(1, static_cast<int>(std::lround(h * 0.14)));
  for (int g = 0; g < n; ++g) {
    const double cx0 = w.x + g * gw + gw * 0.15, cx1 = w.x + (g + 1) * gw - gw * 0.15;
    const double top = oy + line.y + h * 0.12, bottom = oy + line.y + h * 0.88;
    const int strokes = rng.uniform_int(2, 3);
    for (int s = 0; s < strokes; ++s) {
      const double xa = rng.uniform(cx0, cx1), xb = rng.uniform(cx0, cx1);
      double ya, yb;
      switch (rng.uniform_int(0, 2)) {
        case 0: ya = top, yb = bottom; break;                                    // vertical-ish
        case 1: ya = yb = rng.uniform(top, bottom); break;                       // horizontal
        default: ya = rng.uniform(top, bottom), yb = rng.uniform(top, bottom);  // diagonal
      }
      const cv::Point2d pa(ox + xa, ya + arc_offset(line, xa));
      const cv::Point2d pb(ox + xb, yb + arc_offset(line, xb));
      constexpr int kShift = 4;
      cv::line(img, cv::Point(cvRound(pa.x * (1 << kShift)), cvRound(pa.y * (1 << kShift))),
               cv::Point(cvRound(pb.x * (1 << kShift)), cvRound(pb.y * (1 << kShift))), color,
               thick, cv::LINE_AA, kShift);
    }
  }
}

}  // namespace

void SceneSpec::validate() const {
  auto check = [&](IntRange r, const char* name) {
    if (r.min < 1 || r.max < r.min) {
      throw std::invalid_argument("scene spec: invalid range for " + std::string(name));
    }
  };
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("scene spec: image size must be positive");
  }
  check(paragraphs, "paragraphs");
  check(lines_per_paragraph, "lines_per_paragraph");
  check(words_per_line, "words_per_line");
  check(word_height, "word_height");
  check(word_width, "word_width");
  if (clutter_density < 0) throw std::invalid_argument("scene spec: clutter_density must be >= 0");
}

std::string SceneSpec::describe() const {
  std::ostringstream os;
  os << "seed=" << seed << " size=" << width << "x" << height << " paragraphs=" << paragraphs.min
     << ".." << paragraphs.max << " lines=" << lines_per_paragraph.min << ".."
     << lines_per_paragraph.max << " words=" << words_per_line.min << ".." << words_per_line.max
     << " word_h=" << word_height.min << ".." << word_height.max << " word_w=" << word_width.min
     << ".." << word_width.max << " curvature=" << curvature;
  return os.str();
}

std::string synth_image_id(std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth_%06llu", static_cast<unsigned long long>(seed));
  return buf;
}

HierSample generate(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed * 0x9E3779B97F4A7C15ULL + 1);
  HierSample s;
  s.image_id = synth_image_id(spec.seed);
  s.width = spec.width;
  s.height = spec.height;
  s.task = Task::kMulti;

  cv::Vec3f base;
  s.image = render_background(spec, rng, base);
  const double lum = (base[0] + base[1] + base[2]) / 3.0;
  Grid<std::uint8_t> occupied(spec.height, spec.width);

  struct Placed {
    BlockLayout block;
    double x, y;
  };
  std::vector<Placed> placed;
  const int n_paragraphs = rng.in(spec.paragraphs);
  int attempts = 0;
  while (static_cast<int>(placed.size()) < n_paragraphs) {
    BlockLayout block = layout_block(spec, rng);
    bool done = false;
    while (!done) {
      if (++attempts > kMaxPackingAttempts) {
        throw std::runtime_error("synthdata: cannot pack scene after " +
                                 std::to_string(kMaxPackingAttempts) + " attempts (" +
                                 spec.describe() + ")");
      }
      const double max_x = spec.width - kBorder - block.width;
      const double max_y = spec.height - kBorder - block.height;
      if (max_x < kBorder || max_y < kBorder) break;  // re-layout a smaller block
      const double x = std::floor(rng.uniform(kBorder, max_x));
      const double y = std::floor(rng.uniform(kBorder, max_y));
      const int r0 = std::max(0, static_cast<int>(y) - kParagraphGap);
      const int r1 = std::min(spec.height - 1, static_cast<int>(y + block.height) + kParagraphGap);
      const int c0 = std::max(0, static_cast<int>(x) - kParagraphGap);
      const int c1 = std::min(spec.width - 1, static_cast<int>(x + block.width) + kParagraphGap);
      bool free = true;
      for (int r = r0; r <= r1 && free; ++r) {
        for (int c = c0; c <= c1; ++c) {
          if (occupied(r, c)) { free = false; break; }
        }
      }
      if (!free) continue;
      const int top = std::max(0, static_cast<int>(y));
      const int bottom = std::min(spec.height - 1, static_cast<int>(y + block.height));
      const int left = std::max(0, static_cast<int>(x));
      const int right = std::min(spec.width - 1, static_cast<int>(x + block.width));
      for (int r = top; r <= bottom; ++r) {
        for (int c = left; c <= right; ++c) {
          occupied(r, c) = 1;
        }
      }
      placed.push_back({std::move(block), x, y});
      done = true;
    }
  }

  // Clutter strokes stay outside paragraph blocks.
  const int n_clutter = static_cast<int>(
      std::lround(spec.clutter_density * spec.width * spec.height / 10000.0));
  for (int i = 0; i < n_clutter; ++i) {
    const int x = rng.uniform_int(0, spec.width - 1), y = rng.uniform_int(0, spec.height - 1);
    const double len = rng.uniform(4, 14), ang = rng.uniform(0, std::numbers::pi);
    const int x2 = static_cast<int>(x + len * std::cos(ang));
    const int y2 = static_cast<int>(y + len * std::sin(ang));
    if (!occupied.contains(y2, x2) || occupied(y, x) || occupied(y2, x2)) continue;
    const double shade = lum > 0.5 ? lum - rng.uniform(0.15, 0.3) : lum + rng.uniform(0.15, 0.3);
    cv::line(s.image, {x, y}, {x2, y2}, cv::Scalar(shade, shade, shade), 1, cv::LINE_AA);
  }

  const double ink = lum > 0.5 ? rng.uniform(0.0, 0.15) : rng.uniform(0.85, 1.0);
  int word_id = 0, line_id = 0, para_id = 0;
  for (const auto& p : placed) {
    ParagraphAnn para;
    para.id = para_id++;
    std::vector<Point> para_pts;
    const cv::Scalar color(ink + rng.uniform(-0.05, 0.05), ink + rng.uniform(-0.05, 0.05),
                           ink + rng.uniform(-0.05, 0.05));
    for (const auto& l : p.block.lines) {
      LineAnn line;
      line.id = line_id++;
      std::vector<Point> line_pts;
      for (const auto& w : l.words) {
        WordAnn word;
        word.id = word_id++;
        word.polygon = word_polygon(l, w, p.x, p.y);
        draw_glyphs(s.image, l, w, p.x, p.y, color, rng);
        line_pts.insert(line_pts.end(), word.polygon.points.begin(), word.polygon.points.end());
        line.word_ids.push_back(word.id);
        s.words.push_back(std::move(word));
      }
      line.polygon.points = convex_hull(line_pts);
      para_pts.insert(para_pts.end(), line.polygon.points.begin(), line.polygon.points.end());
      para.line_ids.push_back(line.id);
      s.lines.push_back(std::move(line));
    }
    para.polygon = Polygon{convex_hull(para_pts)};
    s.paragraphs.push_back(std::move(para));
  }
  cv::min(s.image, 1.0, s.image);
  cv::max(s.image, 0.0, s.image);
  return s;
}

HierSample degrade(const HierSample& sample, DegradeMode mode) {
  HierSample out = sample;
  out.paragraphs.clear();
  if (mode == DegradeMode::kWordOnly) {
    out.lines.clear();
    out.task = Task::kWord;
  } else {
    out.words.clear();
    for (auto& l : out.lines) l.word_ids.clear();
    out.task = Task::kLine;
  }
  return out;
}

}  // namespace etsam
