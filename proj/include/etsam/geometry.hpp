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

#include <vector>

#include "etsam/grid.hpp"

namespace etsam {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }

double distance(Point a, Point b);

// Closed polygon in image pixels; the last vertex connects back to the first.
struct Polygon {
  std::vector<Point> points;

  friend bool operator==(const Polygon&, const Polygon&) = default;
};

// Signed shoelace area (positive for counter-clockwise in a y-up frame).
double signed_area(const Polygon& poly);
double area(const Polygon& poly);
// Area-weighted centroid; falls back to the vertex mean for zero area.
Point centroid(const Polygon& poly);
Polygon scaled(const Polygon& poly, double scale);

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};
Box bounds(const Polygon& poly);

// Even-odd test with the half-open convention used by rasterize(): points on
// a left or top edge are inside, on a right or bottom edge outside.
bool contains(const Polygon& poly, Point p);

std::vector<Point> convex_hull(std::vector<Point> points);

struct RasterResult {
  Mask mask;
  bool degenerate = false;  // polygon had zero area after scaling
};

// Cell (r, c) is set iff its center (c + 0.5, r + 0.5) lies inside the
// polygon scaled by `scale`.
RasterResult rasterize(const Polygon& poly, int rows, int cols, double scale);

struct OrientedRect {
  Point center;
  double width = 0;   // along the direction (cos angle, sin angle)
  double height = 0;  // width >= height
  double angle = 0;   // radians in [-pi/2, pi/2)

  double area() const { return width * height; }
  std::vector<Point> corners() const;
};

struct RectResult {
  OrientedRect rect;
  bool degenerate = false;  // collinear input; height clamped to 1 px
};

// Minimum-area enclosing rectangle via rotating calipers over the hull.
RectResult min_bounding_rect(const Polygon& poly);

struct CenterPoint {
  Point p;
  double width = 0;  // distance between the paired boundary points
};

struct CenterLineResult {
  std::vector<CenterPoint> points;
  bool degenerate = false;
};

// Medial path of a word contour. Quads join the midpoints of their two short
// edges; 2k-vertex contours pair vertex i with vertex 2k-1-i. The path is
// resampled so adjacent points are at most `spacing` apart.
CenterLineResult center_line(const Polygon& poly, double spacing);

}  // namespace etsam
