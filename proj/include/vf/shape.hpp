// Copyright 2026 The vfhand Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Object shapes: simple CCW polygons centered on their vertex mean, the
// five-piece built-in set, and the text catalog format.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vf/common.hpp"

namespace vf {

struct Shape2 {
  std::string name;
  std::vector<Vec2> vertices;  // CCW, simple, vertex mean at the origin
  // k-fold rotational symmetry used (optionally) when scoring orientation
  // goals; 1 means orientation is unique. The factories record each shape's
  // true symmetry; tasks score on absolute orientation unless they opt in.
  int rotational_symmetry = 1;
};

inline double polygon_signed_area(const std::vector<Vec2>& v) {
  double a = 0.0;
  for (size_t i = 0, n = v.size(); i < n; ++i) {
    const Vec2 p = v[i], q = v[(i + 1) % n];
    a += cross(p, q);
  }
  return 0.5 * a;
}

// Crossing-number containment test (boundary points may land on either side).
inline bool point_in_polygon(Vec2 p, const Vec2* v, size_t n) {
  bool inside = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const bool straddles = (v[i].y > p.y) != (v[j].y > p.y);
    if (straddles) {
      const double x_at =
          v[j].x + (v[i].x - v[j].x) * (p.y - v[j].y) / (v[i].y - v[j].y);
      if (p.x < x_at) inside = !inside;
    }
  }
  return inside;
}

inline bool point_in_polygon(Vec2 p, const std::vector<Vec2>& v) {
  return point_in_polygon(p, v.data(), v.size());
}

inline double bounding_radius(const Shape2& s) {
  double r = 0.0;
  for (const Vec2& v : s.vertices) r = std::max(r, norm(v));
  return r;
}

namespace detail {
// Proper segment intersection test used by the simplicity validator.
inline bool segments_properly_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(d - c, a - c);
  const double d2 = cross(d - c, b - c);
  const double d3 = cross(b - a, c - a);
  const double d4 = cross(b - a, d - a);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}
}  // namespace detail

// Throws std::invalid_argument when the polygon is unusable as an object
// shape: too few vertices, non-finite coordinates, clockwise winding,
// self-intersection, or vertex mean away from the origin.
inline void validate_shape(const Shape2& s) {
  const auto& v = s.vertices;
  if (v.size() < 3) throw std::invalid_argument("shape " + s.name + ": needs >= 3 vertices");
  Vec2 mean{0, 0};
  for (const Vec2& p : v) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument("shape " + s.name + ": non-finite vertex");
    mean += p;
  }
  mean = mean * (1.0 / static_cast<double>(v.size()));
  if (norm(mean) > 1e-9)
    throw std::invalid_argument("shape " + s.name + ": vertex mean not at origin");
  if (polygon_signed_area(v) <= 0.0)
    throw std::invalid_argument("shape " + s.name + ": vertices must wind CCW");
  const size_t n = v.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      // Skip adjacent edges (shared endpoint).
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (detail::segments_properly_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]))
        throw std::invalid_argument("shape " + s.name + ": self-intersecting outline");
    }
  }
  if (s.rotational_symmetry < 1)
    throw std::invalid_argument("shape " + s.name + ": symmetry must be >= 1");
}

namespace detail {
inline void recenter(Shape2& s) {
  Vec2 mean{0, 0};
  for (const Vec2& p : s.vertices) mean += p;
  mean = mean * (1.0 / static_cast<double>(s.vertices.size()));
  for (Vec2& p : s.vertices) p -= mean;
}

// Segment count for an arc so a full turn gets kArcFullTurnSegments pieces.
inline constexpr int kArcFullTurnSegments = 64;
inline int arc_segments(double arc_angle) {
  return std::max(1, static_cast<int>(std::ceil(std::abs(arc_angle) /
                                                (2.0 * kPi / kArcFullTurnSegments))));
}

// Appends points along a CCW arc, excluding the start point, including the end.
inline void append_arc(std::vector<Vec2>& out, Vec2 center, double radius,
                       double a0, double a1) {
  while (a1 < a0) a1 += 2.0 * kPi;
  const int n = arc_segments(a1 - a0);
  for (int i = 1; i <= n; ++i) {
    const double a = a0 + (a1 - a0) * static_cast<double>(i) / n;
    out.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
}
}  // namespace detail

inline Shape2 make_square(double side, const std::string& name = "cube") {
  const double h = side / 2.0;
  Shape2 s{name, {{-h, -h}, {h, -h}, {h, h}, {-h, h}}, 4};
  return s;
}

inline Shape2 make_regular_polygon(int n, double circumradius,
                                   const std::string& name) {
  Shape2 s;
  s.name = name;
  s.rotational_symmetry = n;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * i / n;
    s.vertices.push_back({circumradius * std::cos(a), circumradius * std::sin(a)});
  }
  detail::recenter(s);
  return s;
}

inline Shape2 make_star(int points, double r_outer, double r_inner,
                        const std::string& name = "star") {
  Shape2 s;
  s.name = name;
  s.rotational_symmetry = points;
  for (int i = 0; i < points; ++i) {
    const double a_out = 2.0 * kPi * i / points + kPi / 2.0;
    const double a_in = a_out + kPi / points;
    s.vertices.push_back({r_outer * std::cos(a_out), r_outer * std::sin(a_out)});
    s.vertices.push_back({r_inner * std::cos(a_in), r_inner * std::sin(a_in)});
  }
  detail::recenter(s);
  return s;
}

// A square with one face replaced by a protruding half-cylinder.
inline Shape2 make_cube_cylinder(double side, const std::string& name = "cube_cylinder") {
  const double h = side / 2.0;
  Shape2 s;
  s.name = name;
  s.vertices = {{-h, -h}, {h, -h}, {h, h}};
  detail::append_arc(s.vertices, {0.0, h}, h, 0.0, kPi);  // bulge over +y
  // append_arc ends at (-h, h), which closes back to the first vertex.
  detail::recenter(s);
  return s;
}

// Union outline of three equal circles whose centers sit on a ring around
// the origin; adjacent circles overlap, so the outline is three outer arcs
// meeting at the outward intersection points.
inline Shape2 make_three_cylinder(double radius, double center_dist,
                                  const std::string& name = "three_cylinder") {
  const std::array<double, 3> phi = {kPi / 2.0, kPi / 2.0 + 2.0 * kPi / 3.0,
                                     kPi / 2.0 + 4.0 * kPi / 3.0};
  std::array<Vec2, 3> c;
  for (int i = 0; i < 3; ++i)
    c[i] = {center_dist * std::cos(phi[i]), center_dist * std::sin(phi[i])};

  // Outward intersection point of circles i and j.
  auto outer_meet = [&](int i, int j) -> Vec2 {
    const Vec2 d = c[j] - c[i];
    const double dist = norm(d);
    if (dist >= 2.0 * radius)
      throw std::invalid_argument("three_cylinder: circles do not overlap");
    const Vec2 mid = 0.5 * (c[i] + c[j]);
    const double half = std::sqrt(radius * radius - 0.25 * dist * dist);
    const Vec2 n = perp(d * (1.0 / dist));
    const Vec2 p1 = mid + half * n, p2 = mid - half * n;
    return norm(p1) > norm(p2) ? p1 : p2;
  };

  Shape2 s;
  s.name = name;
  s.rotational_symmetry = 3;
  for (int i = 0; i < 3; ++i) {
    const int prev = (i + 2) % 3, next = (i + 1) % 3;
    const Vec2 from = outer_meet(i, prev);  // CCW entry point onto circle i
    const Vec2 to = outer_meet(i, next);    // CCW exit point
    const double a0 = std::atan2(from.y - c[i].y, from.x - c[i].x);
    const double a1 = std::atan2(to.y - c[i].y, to.x - c[i].x);
    if (s.vertices.empty()) s.vertices.push_back(from);
    detail::append_arc(s.vertices, c[i], radius, a0, a1);
  }
  s.vertices.pop_back();  // final arc endpoint duplicates the first vertex
  detail::recenter(s);
  return s;
}

// The five benchmark objects at desk scale (meters).
inline std::vector<Shape2> builtin_catalog() {
  std::vector<Shape2> out;
  out.push_back(make_square(0.040, "cube"));
  out.push_back(make_regular_polygon(6, 0.022, "hexagon"));
  out.push_back(make_star(5, 0.025, 0.0115, "star"));
  out.push_back(make_cube_cylinder(0.040, "cube_cylinder"));
  out.push_back(make_three_cylinder(0.015, 0.015, "three_cylinder"));
  for (const Shape2& s : out) validate_shape(s);
  return out;
}

// ---------------------------------------------------------------------------
// Text catalog. Format, one shape per block:
//   shape <name>
//   sym <k>
//   v <x> <y>          (one line per vertex, %.17g, round-trips exactly)
//   end
// Blank lines and lines starting with '#' are ignored.

inline void save_catalog(const std::vector<Shape2>& shapes, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "# variable-friction hand object catalog\n";
  char line[96];
  for (const Shape2& s : shapes) {
    out << "shape " << s.name << "\n";
    out << "sym " << s.rotational_symmetry << "\n";
    for (const Vec2& v : s.vertices) {
      std::snprintf(line, sizeof line, "v %.17g %.17g\n", v.x, v.y);
      out << line;
    }
    out << "end\n";
  }
  if (!out) throw std::runtime_error("short write: " + path);
}

inline std::vector<Shape2> load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open catalog: " + path);
  std::vector<Shape2> shapes;
  Shape2 cur;
  bool open = false;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok) || tok[0] == '#') continue;
    if (tok == "shape") {
      if (open) fail("nested shape block");
      cur = Shape2{};
      if (!(ss >> cur.name)) fail("shape needs a name");
      open = true;
    } else if (tok == "sym") {
      if (!open) fail("sym outside shape block");
      if (!(ss >> cur.rotational_symmetry)) fail("bad sym line");
    } else if (tok == "v") {
      if (!open) fail("vertex outside shape block");
      Vec2 v;
      if (!(ss >> v.x >> v.y)) fail("bad vertex line");
      cur.vertices.push_back(v);
    } else if (tok == "end") {
      if (!open) fail("end outside shape block");
      validate_shape(cur);
      shapes.push_back(std::move(cur));
      open = false;
    } else {
      fail("unknown directive: " + tok);
    }
  }
  if (open) fail("unterminated shape block");
  return shapes;
}

inline const Shape2& find_shape(const std::vector<Shape2>& catalog, const std::string& name) {
  for (const Shape2& s : catalog)
    if (s.name == name) return s;
  throw std::invalid_argument("unknown shape: " + name);
}

}  // namespace vf
