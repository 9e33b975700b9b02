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
#include "etsam/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace etsam {

namespace {

constexpr double kAreaEps = 1e-12;

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double normalize_half_turn(double angle) {
  constexpr double kPi = std::numbers::pi;
  while (angle >= kPi / 2) angle -= kPi;
  while (angle < -kPi / 2) angle += kPi;
  return angle;
}

// Sorted x positions where the horizontal line at `y` crosses polygon edges,
// using the half-open rule (a vertex exactly at y counts as above the line).
void row_crossings(const std::vector<Point>& pts, double y, std::vector<double>& xs) {
  xs.clear();
  const std::size_t n = pts.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = pts[j], b = pts[i];
    if ((a.y <= y) != (b.y <= y)) {
      xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
  }
  std::sort(xs.begin(), xs.end());
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double signed_area(const Polygon& poly) {
  const auto& p = poly.points;
  const std::size_t n = p.size();
  if (n < 3) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    s += p[j].x * p[i].y - p[i].x * p[j].y;
  }
  return 0.5 * s;
}

double area(const Polygon& poly) { return std::abs(signed_area(poly)); }

Point centroid(const Polygon& poly) {
  const auto& p = poly.points;
  if (p.empty()) return {};
  const double a = signed_area(poly);
  if (std::abs(a) < kAreaEps) {
    Point m;
    for (const auto& q : p) m = m + q;
    return m * (1.0 / static_cast<double>(p.size()));
  }
  double cx = 0, cy = 0;
  const std::size_t n = p.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const double f = p[j].x * p[i].y - p[i].x * p[j].y;
    cx += (p[j].x + p[i].x) * f;
    cy += (p[j].y + p[i].y) * f;
  }
  return {cx / (6.0 * a), cy / (6.0 * a)};
}

Polygon scaled(const Polygon& poly, double scale) {
  Polygon out;
  out.points.reserve(poly.points.size());
  for (const auto& p : poly.points) out.points.push_back(p * scale);
  return out;
}

Box bounds(const Polygon& poly) {
  if (poly.points.empty()) return {};
  Box b{poly.points[0].x, poly.points[0].y, poly.points[0].x, poly.points[0].y};
  for (const auto& p : poly.points) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

bool contains(const Polygon& poly, Point p) {
  if (poly.points.size() < 3) return false;
  std::vector<double> xs;
  row_crossings(poly.points, p.y, xs);
  std::size_t left = 0;
  for (double x : xs) left += x <= p.x;
  return left % 2 == 1;
}

std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

RasterResult rasterize(const Polygon& poly, int rows, int cols, double scale) {
  if (!(scale > 0)) throw std::invalid_argument("rasterize: scale must be > 0");
  RasterResult out{Mask(rows, cols), false};
  const Polygon sp = scaled(poly, scale);
  if (area(sp) < kAreaEps) {
    out.degenerate = true;
    return out;
  }
  const Box b = bounds(sp);
  const int r0 = std::max(0, static_cast<int>(std::floor(b.y0 - 0.5)));
  const int r1 = std::min(rows - 1, static_cast<int>(std::ceil(b.y1)));
  std::vector<double> xs;
  for (int r = r0; r <= r1; ++r) {
    row_crossings(sp.points, r + 0.5, xs);
    for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
      // centers c + 0.5 in [xs[i], xs[i+1])
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[i] - 0.5)));
      const int c1 = std::min(cols, static_cast<int>(std::ceil(xs[i + 1] - 0.5)));
      for (int c = c0; c < c1; ++c) out.mask(r, c) = 1;
    }
  }
  return out;
}

std::vector<Point> OrientedRect::corners() const {
  const Point u{std::cos(angle), std::sin(angle)};
  const Point v{-u.y, u.x};
  const Point a = u * (width / 2), b = v * (height / 2);
  return {center - a - b, center + a - b, center + a + b, center - a + b};
}

RectResult min_bounding_rect(const Polygon& poly) {
  if (poly.points.empty()) throw std::invalid_argument("min_bounding_rect: empty polygon");
  const std::vector<Point> hull = convex_hull(poly.points);
  RectResult out;
  const bool flat = hull.size() < 3 || area(Polygon{hull}) < kAreaEps;
  if (flat) {
    // Collinear: span the two farthest input points, clamp height to 1 px.
    Point a = poly.points[0], b = poly.points[0];
    double best = -1;
    for (const auto& p : poly.points) {
      for (const auto& q : poly.points) {
        const double d = distance(p, q);
        if (d > best) best = d, a = p, b = q;
      }
    }
    out.degenerate = true;
    out.rect.center = (a + b) * 0.5;
    out.rect.width = std::max(best, 1.0);
    out.rect.height = 1.0;
    out.rect.angle = best > 0 ? normalize_half_turn(std::atan2(b.y - a.y, b.x - a.x)) : 0.0;
    return out;
  }

  double best_area = std::numeric_limits<double>::infinity();
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point e = hull[(i + 1) % n] - hull[i];
    const double len = std::hypot(e.x, e.y);
    if (len == 0) continue;
    const Point u{e.x / len, e.y / len};
    const Point v{-u.y, u.x};
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& p : hull) {
      const double pu = p.x * u.x + p.y * u.y;
      const double pv = p.x * v.x + p.y * v.y;
      umin = std::min(umin, pu), umax = std::max(umax, pu);
      vmin = std::min(vmin, pv), vmax = std::max(vmax, pv);
    }
    const double eu = umax - umin, ev = vmax - vmin;
    if (eu * ev < best_area) {
      best_area = eu * ev;
      const double cu = 0.5 * (umin + umax), cv = 0.5 * (vmin + vmax);
      out.rect.center = u * cu + v * cv;
      if (eu >= ev) {
        out.rect.width = eu, out.rect.height = ev;
        out.rect.angle = normalize_half_turn(std::atan2(u.y, u.x));
      } else {
        out.rect.width = ev, out.rect.height = eu;
        out.rect.angle = normalize_half_turn(std::atan2(v.y, v.x));
      }
    }
  }
  return out;
}

CenterLineResult center_line(const Polygon& poly, double spacing) {
  if (!(spacing > 0)) throw std::invalid_argument("center_line: spacing must be > 0");
  CenterLineResult out;
  const auto& p = poly.points;
  if (p.size() < 3 || area(poly) < kAreaEps) {
    out.degenerate = true;
    out.points.push_back({centroid(poly), 1.0});
    return out;
  }

  std::vector<Point> mids;
  std::vector<double> widths;
  const std::size_t n = p.size();
  if (n % 2 == 0) {
    std::vector<Point> v = p;
    if (n == 4) {
      // Make v0-v1 / v2-v3 the long pair so the short edges get joined.
      const double pair_a = distance(v[0], v[1]) + distance(v[2], v[3]);
      const double pair_b = distance(v[1], v[2]) + distance(v[3], v[0]);
      if (pair_b > pair_a) std::rotate(v.begin(), v.begin() + 1, v.end());
    }
    const std::size_t k = n / 2;
    for (std::size_t i = 0; i < k; ++i) {
      const Point a = v[i], b = v[n - 1 - i];
      mids.push_back((a + b) * 0.5);
      widths.push_back(distance(a, b));
    }
  } else {
    // Odd vertex counts have no top/bottom pairing; use the rectangle axis.
    const OrientedRect r = min_bounding_rect(poly).rect;
    const Point u{std::cos(r.angle), std::sin(r.angle)};
    mids = {r.center - u * (r.width / 2), r.center + u * (r.width / 2)};
    widths = {r.height, r.height};
  }

  out.points.push_back({mids[0], widths[0]});
  for (std::size_t i = 0; i + 1 < mids.size(); ++i) {
    const double len = distance(mids[i], mids[i + 1]);
    if (len == 0) continue;
    const int steps = std::max(1, static_cast<int>(std::ceil(len / spacing)));
    for (int s = 1; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      out.points.push_back({mids[i] + (mids[i + 1] - mids[i]) * t,
                            widths[i] + (widths[i + 1] - widths[i]) * t});
    }
  }
  return out;
}

}  // namespace etsam
