#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace hexpose {

inline constexpr double kPi = std::numbers::pi;

/// Continuous pixel coordinate: x is the column, y is the row.
struct Point2 {
  double x{0.0};
  double y{0.0};

  constexpr Point2& operator+=(const Point2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Point2& operator-=(const Point2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  friend constexpr Point2 operator+(Point2 a, const Point2& b) { return a += b; }
  friend constexpr Point2 operator-(Point2 a, const Point2& b) { return a -= b; }
  friend constexpr Point2 operator-(const Point2& a) { return {-a.x, -a.y}; }
  friend constexpr Point2 operator*(double s, const Point2& p) { return {s * p.x, s * p.y}; }
  friend constexpr Point2 operator*(const Point2& p, double s) { return {s * p.x, s * p.y}; }
  friend constexpr bool operator==(const Point2&, const Point2&) = default;
};

constexpr double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
constexpr double squared_norm(const Point2& p) { return dot(p, p); }
inline double norm(const Point2& p) { return std::hypot(p.x, p.y); }
inline double distance(const Point2& a, const Point2& b) { return norm(b - a); }
constexpr double squared_distance(const Point2& a, const Point2& b) { return squared_norm(b - a); }

struct BoundingBox {
  Point2 top_left;
  Point2 bottom_right;

  constexpr double width() const { return bottom_right.x - top_left.x; }
  constexpr double height() const { return bottom_right.y - top_left.y; }
  constexpr double mean_side() const { return 0.5 * (width() + height()); }
  constexpr double area() const { return width() * height(); }
  friend constexpr bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Componentwise min/max over a non-empty point set.
inline BoundingBox bounding_box(std::span<const Point2> pts) {
  BoundingBox b{pts.front(), pts.front()};
  for (const Point2& p : pts.subspan(1)) {
    b.top_left.x = std::min(b.top_left.x, p.x);
    b.top_left.y = std::min(b.top_left.y, p.y);
    b.bottom_right.x = std::max(b.bottom_right.x, p.x);
    b.bottom_right.y = std::max(b.bottom_right.y, p.y);
  }
  return b;
}

inline BoundingBox translated(const BoundingBox& b, const Point2& t) {
  return {b.top_left + t, b.bottom_right + t};
}

/// Intersection over union; zero-area boxes yield 0 unless identical.
inline double intersection_over_union(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.bottom_right.x, b.bottom_right.x) - std::max(a.top_left.x, b.top_left.x);
  const double h = std::min(a.bottom_right.y, b.bottom_right.y) - std::max(a.top_left.y, b.top_left.y);
  const double inter = (w > 0 && h > 0) ? w * h : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return a == b ? 1.0 : 0.0;
  return inter / uni;
}

/// Locations of all atomic parts, indexed by atomic part index.
struct Configuration {
  std::vector<Point2> points;

  Configuration() = default;
  explicit Configuration(std::size_t n) : points(n) {}
  explicit Configuration(std::vector<Point2> p) : points(std::move(p)) {}

  std::size_t size() const { return points.size(); }
  Point2& operator[](std::size_t i) { return points[i]; }
  const Point2& operator[](std::size_t i) const { return points[i]; }
  std::span<const Point2> span() const { return points; }
  bool finite() const {
    return std::all_of(points.begin(), points.end(),
                       [](const Point2& p) { return std::isfinite(p.x) && std::isfinite(p.y); });
  }
  friend bool operator==(const Configuration&, const Configuration&) = default;
};

}  // namespace hexpose
