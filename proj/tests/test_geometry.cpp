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

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "etsam/geometry.hpp"

namespace etsam {
namespace {

constexpr double kPi = std::numbers::pi;

Polygon rect(double x0, double y0, double x1, double y1) {
  return {{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}};
}

Polygon rotated(const Polygon& p, double angle, Point about) {
  Polygon out;
  const double c = std::cos(angle), s = std::sin(angle);
  for (const auto& v : p.points) {
    const Point d = v - about;
    out.points.push_back({about.x + c * d.x - s * d.y, about.y + s * d.x + c * d.y});
  }
  return out;
}

// Ray casting written independently of the library.
bool point_in_polygon(const Polygon& poly, double x, double y) {
  bool in = false;
  const auto& v = poly.points;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > y) != (v[j].y > y)) {
      const double xi = v[j].x + (y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (x < xi) in = !in;
    }
  }
  return in;
}

// Area of the axis-aligned box of the polygon rotated by -angle.
double sweep_min_area(const Polygon& poly, double step_deg = 0.1) {
  double best = INFINITY;
  for (double a = 0; a < 180.0; a += step_deg) {
    const double t = a * kPi / 180.0, c = std::cos(t), s = std::sin(t);
    double u0 = INFINITY, u1 = -INFINITY, v0 = INFINITY, v1 = -INFINITY;
    for (const auto& p : poly.points) {
      const double u = c * p.x + s * p.y, v = -s * p.x + c * p.y;
      u0 = std::min(u0, u), u1 = std::max(u1, u);
      v0 = std::min(v0, v), v1 = std::max(v1, v);
    }
    best = std::min(best, (u1 - u0) * (v1 - v0));
  }
  return best;
}

TEST(Rasterize, UnitSquareCells) {
  const auto r = rasterize(rect(0, 0, 4, 4), 8, 8, 1.0);
  EXPECT_FALSE(r.degenerate);
  EXPECT_EQ(mask_area(r.mask), 16);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(r.mask(y, x), 1);
}

TEST(Rasterize, HalfScale) {
  EXPECT_EQ(mask_area(rasterize(rect(0, 0, 4, 4), 8, 8, 0.5).mask), 4);
}

TEST(Rasterize, LShapeMatchesBruteForce) {
  const Polygon l{{{1, 1}, {13, 1}, {13, 5}, {6, 5}, {6, 12}, {1, 12}}};
  const auto r = rasterize(l, 16, 16, 1.0);
  std::int64_t brute = 0;
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const bool in = point_in_polygon(l, x + 0.5, y + 0.5);
      brute += in;
      EXPECT_EQ(r.mask(y, x) != 0, in) << x << "," << y;
    }
  }
  EXPECT_EQ(mask_area(r.mask), brute);
}

TEST(Rasterize, RandomPolygonsMatchBruteForce) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.3, 30.7);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point> pts(6);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const Polygon hull{convex_hull(pts)};
    if (hull.points.size() < 3) continue;
    const auto r = rasterize(hull, 32, 32, 1.0);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        ASSERT_EQ(r.mask(y, x) != 0, point_in_polygon(hull, x + 0.5, y + 0.5));
  }
}

TEST(Rasterize, DegenerateFlagged) {
  const auto r = rasterize({{{1, 1}, {5, 5}, {9, 9}}}, 10, 10, 1.0);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(mask_area(r.mask), 0);
}

TEST(Rasterize, AreaScalesQuadratically) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(2, 40);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Point> pts(8);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const Polygon hull{convex_hull(pts)};
    const Box b = bounds(hull);
    if (b.x1 - b.x0 < 8 || b.y1 - b.y0 < 8) continue;
    const double a1 = mask_area(rasterize(hull, 64, 64, 1.0).mask);
    const double a2 = mask_area(rasterize(hull, 128, 128, 2.0).mask);
    EXPECT_GE(a2, 3.5 * a1);
    EXPECT_LE(a2, 4.5 * a1);
  }
}

TEST(MinBoundingRect, AxisAligned) {
  const auto r = min_bounding_rect(rect(0, 0, 10, 4));
  EXPECT_FALSE(r.degenerate);
  EXPECT_NEAR(r.rect.center.x, 5, 1e-9);
  EXPECT_NEAR(r.rect.center.y, 2, 1e-9);
  EXPECT_NEAR(r.rect.width, 10, 1e-9);
  EXPECT_NEAR(r.rect.height, 4, 1e-9);
  EXPECT_NEAR(r.rect.angle, 0, 1e-9);
}

TEST(MinBoundingRect, Rotated30) {
  const auto poly = rotated(rect(0, 0, 10, 4), kPi / 6, {5, 2});
  const auto r = min_bounding_rect(poly);
  EXPECT_NEAR(r.rect.width, 10, 1e-9);
  EXPECT_NEAR(r.rect.height, 4, 1e-9);
  EXPECT_NEAR(r.rect.angle, kPi / 6, 1e-9);
  EXPECT_NEAR(r.rect.area(), sweep_min_area(poly), 1e-3 * r.rect.area());
}

TEST(MinBoundingRect, EquilateralTriangle) {
  const Polygon tri{{{0, 0}, {2, 0}, {1, std::sqrt(3.0)}}};
  const auto r = min_bounding_rect(tri);
  EXPECT_NEAR(r.rect.area(), sweep_min_area(tri, 0.01), 1e-3);
}

TEST(MinBoundingRect, RandomConvexAgainstSweep) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Point> pts(7);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const Polygon hull{convex_hull(pts)};
    if (area(hull) < 1) continue;
    const auto r = min_bounding_rect(hull);
    EXPECT_GE(r.rect.area(), area(hull) - 1e-9);
    EXPECT_LE(r.rect.area(), sweep_min_area(hull) * (1 + 1e-3));
    EXPECT_GE(r.rect.width, r.rect.height);
    EXPECT_GE(r.rect.angle, -kPi / 2);
    EXPECT_LT(r.rect.angle, kPi / 2);
    // Every vertex inside the rectangle.
    const double c = std::cos(r.rect.angle), s = std::sin(r.rect.angle);
    for (const auto& p : hull.points) {
      const Point d = p - r.rect.center;
      EXPECT_LE(std::abs(c * d.x + s * d.y), r.rect.width / 2 + 1e-7);
      EXPECT_LE(std::abs(-s * d.x + c * d.y), r.rect.height / 2 + 1e-7);
    }
  }
}

TEST(MinBoundingRect, CollinearClampsHeight) {
  const auto r = min_bounding_rect({{{0, 0}, {5, 0}, {10, 0}}});
  EXPECT_TRUE(r.degenerate);
  EXPECT_NEAR(r.rect.width, 10, 1e-9);
  EXPECT_NEAR(r.rect.height, 1, 1e-9);
}

TEST(CenterLine, AxisAlignedRectangle) {
  const auto cl = center_line(rect(0, 0, 20, 6), 1.0);
  EXPECT_FALSE(cl.degenerate);
  ASSERT_GE(cl.points.size(), 20u);
  EXPECT_NEAR(cl.points.front().p.x, 0, 1e-9);
  EXPECT_NEAR(cl.points.back().p.x, 20, 1e-9);
  for (std::size_t i = 0; i < cl.points.size(); ++i) {
    EXPECT_NEAR(cl.points[i].p.y, 3, 1e-9);
    EXPECT_NEAR(cl.points[i].width, 6, 1e-9);
    if (i) EXPECT_LE(distance(cl.points[i].p, cl.points[i - 1].p), 1.0 + 1e-9);
  }
}

TEST(CenterLine, QuadJoinsShortEdgeMidpoints) {
  const Polygon q{{{0, 0}, {30, 4}, {29, 12}, {1, 9}}};
  const auto cl = center_line(q, 2.0);
  const Point a{0.5, 4.5}, b{29.5, 8};
  EXPECT_NEAR(cl.points.front().p.x, a.x, 1e-9);
  EXPECT_NEAR(cl.points.front().p.y, a.y, 1e-9);
  EXPECT_NEAR(cl.points.back().p.x, b.x, 1e-9);
  EXPECT_NEAR(cl.points.back().p.y, b.y, 1e-9);
  for (const auto& cp : cl.points) {
    // Collinear with the segment a-b.
    const double cross = (b.x - a.x) * (cp.p.y - a.y) - (b.y - a.y) * (cp.p.x - a.x);
    EXPECT_NEAR(cross, 0, 1e-7);
  }
}

TEST(CenterLine, CurvedContourPairsVertices) {
  // 7 top vertices left to right, 7 bottom vertices right to left.
  Polygon poly;
  const int k = 7;
  for (int i = 0; i < k; ++i) {
    const double x = 10.0 * i;
    poly.points.push_back({x, 20 + 8 * std::sin(0.4 * i)});
  }
  for (int i = k - 1; i >= 0; --i) {
    const double x = 10.0 * i + 1;
    poly.points.push_back({x, 32 + 8 * std::sin(0.4 * i)});
  }
  std::vector<Point> mids;
  for (int i = 0; i < k; ++i) {
    const Point a = poly.points[i], b = poly.points[2 * k - 1 - i];
    mids.push_back({(a.x + b.x) / 2, (a.y + b.y) / 2});
  }
  const auto cl = center_line(poly, 0.5);
  // Each pair midpoint is on the path.
  for (const auto& m : mids) {
    double best = INFINITY;
    for (const auto& cp : cl.points) best = std::min(best, distance(cp.p, m));
    EXPECT_LT(best, 1e-9);
  }
  for (std::size_t i = 1; i < cl.points.size(); ++i) {
    EXPECT_LE(distance(cl.points[i].p, cl.points[i - 1].p), 0.5 + 1e-9);
  }
  EXPECT_NEAR(cl.points.front().width, distance(poly.points[0], poly.points[2 * k - 1]), 1e-9);
}

TEST(CenterLine, ConvexPointsInside) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0, 50);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point> pts(4);
    for (auto& p : pts) p = {u(rng), u(rng)};
    const Polygon hull{convex_hull(pts)};
    if (hull.points.size() != 4 || area(hull) < 20) continue;
    for (const auto& cp : center_line(hull, 1.0).points) {
      // Inside up to boundary tolerance.
      bool near_inside = point_in_polygon(hull, cp.p.x, cp.p.y);
      for (double dx : {-1e-6, 1e-6})
        for (double dy : {-1e-6, 1e-6})
          near_inside = near_inside || point_in_polygon(hull, cp.p.x + dx, cp.p.y + dy);
      EXPECT_TRUE(near_inside);
    }
  }
}

TEST(CenterLine, DegenerateGivesCentroid) {
  const auto cl = center_line({{{2, 2}, {4, 4}, {6, 6}}}, 1.0);
  EXPECT_TRUE(cl.degenerate);
  ASSERT_EQ(cl.points.size(), 1u);
  EXPECT_NEAR(cl.points[0].width, 1.0, 1e-12);
}

TEST(Geometry, ShoelaceAndCentroid) {
  EXPECT_NEAR(area(rect(0, 0, 3, 2)), 6, 1e-12);
  const Point c = centroid(rect(2, 4, 6, 8));
  EXPECT_NEAR(c.x, 4, 1e-12);
  EXPECT_NEAR(c.y, 6, 1e-12);
}

}  // namespace
}  // namespace etsam
