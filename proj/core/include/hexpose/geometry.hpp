#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hexpose/point.hpp"

namespace hexpose {

/// p -> scale * R(angle) * p + translation. No reflections.
struct SimilarityTransform {
  double scale{1.0};
  double angle{0.0};  // radians, (-pi, pi]
  Point2 translation{};

  Point2 operator()(const Point2& p) const;
  static SimilarityTransform identity() { return {}; }
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

std::vector<Point2> apply(const SimilarityTransform& t, std::span<const Point2> pts);

/// Exact fit of two distinct source points onto two destination points.
/// Throws DegenerateInput when the source points coincide.
SimilarityTransform fit_two_points(const Point2& src0, const Point2& src1, const Point2& dst0,
                                   const Point2& dst1);

struct AngleBound {
  double max_abs_angle{kPi / 3};
};

/// Per-level rotation limits; levels without an override use `fallback`.
struct AngleBounds {
  std::vector<double> per_level;  // index 0 is level 1
  double fallback{kPi / 3};

  AngleBound at(int level) const {
    const auto i = static_cast<std::size_t>(level - 1);
    return {i < per_level.size() ? per_level[i] : fallback};
  }
};

struct ConstrainedFit {
  SimilarityTransform transform;
  double residual{0.0};  // sum of squared distances after the transform
};

/// Least-squares similarity from src onto dst with |angle| <= bound. When the
/// unconstrained optimum rotates further, the angle is clamped to the nearer
/// bound and scale/translation are re-solved at that angle (scale >= 1e-9).
/// Throws DegenerateInput when every source point is identical.
ConstrainedFit fit_constrained(std::span<const Point2> src, std::span<const Point2> dst, AngleBound bound);

enum class ChildKind : std::uint8_t { Atomic, Composite };

/// Vectorized children of a composite part: one point per atomic child, and
/// (anchor, top-left, bottom-right) per composite child.
struct ChildGeometry {
  std::vector<Point2> points;
  std::vector<ChildKind> kinds;

  bool same_signature(const ChildGeometry& o) const {
    return kinds == o.kinds && points.size() == o.points.size();
  }
};

/// Exemplar similarity: minus the constrained least-squares residual of
/// aligning `exemplar` onto `current`. Always <= 0.
double psi(const ChildGeometry& current, const ChildGeometry& exemplar, AngleBound bound);

}  // namespace hexpose
