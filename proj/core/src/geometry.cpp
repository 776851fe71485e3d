#include "hexpose/geometry.hpp"

#include <cmath>
#include <stdexcept>

#include "hexpose/error.hpp"

namespace hexpose {
namespace {

constexpr double kMinScale = 1e-9;

Point2 mean(std::span<const Point2> pts) {
  Point2 m;
  for (const Point2& p : pts) m += p;
  return (1.0 / static_cast<double>(pts.size())) * m;
}

double residual(const SimilarityTransform& t, std::span<const Point2> src, std::span<const Point2> dst) {
  double r = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) r += squared_distance(t(src[i]), dst[i]);
  return r;
}

}  // namespace

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

Point2 SimilarityTransform::operator()(const Point2& p) const {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {scale * (c * p.x - s * p.y) + translation.x, scale * (s * p.x + c * p.y) + translation.y};
}

std::vector<Point2> apply(const SimilarityTransform& t, std::span<const Point2> pts) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (const Point2& p : pts) out.push_back(t(p));
  return out;
}

SimilarityTransform fit_two_points(const Point2& src0, const Point2& src1, const Point2& dst0,
                                   const Point2& dst1) {
  const Point2 s = src1 - src0;
  const Point2 d = dst1 - dst0;
  const double ss = squared_norm(s);
  if (ss == 0.0) throw DegenerateInput("degenerate pair: source points coincide");
  // z = d / s as complex numbers.
  const double re = dot(s, d) / ss;
  const double im = cross(s, d) / ss;
  SimilarityTransform t;
  t.scale = std::hypot(re, im);
  if (t.scale == 0.0) throw DegenerateInput("degenerate pair: destination points coincide");
  t.angle = wrap_angle(std::atan2(im, re));
  t.translation = dst0 - Point2{re * src0.x - im * src0.y, im * src0.x + re * src0.y};
  return t;
}

ConstrainedFit fit_constrained(std::span<const Point2> src, std::span<const Point2> dst, AngleBound bound) {
  if (src.size() != dst.size()) throw std::invalid_argument("fit_constrained: size mismatch");
  if (src.size() < 2) throw std::invalid_argument("fit_constrained: needs at least two points");
  const Point2 ms = mean(src);
  const Point2 md = mean(dst);
  double a = 0.0;
  double b = 0.0;
  double spread = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Point2 s = src[i] - ms;
    const Point2 d = dst[i] - md;
    a += dot(s, d);
    b += cross(s, d);
    spread += squared_norm(s);
  }
  if (spread == 0.0) throw DegenerateInput("fit_constrained: all source points are identical");

  double angle = std::atan2(b, a);
  if (a == 0.0 && b == 0.0) angle = 0.0;
  angle = wrap_angle(angle);
  if (angle > bound.max_abs_angle) angle = bound.max_abs_angle;
  if (angle < -bound.max_abs_angle) angle = -bound.max_abs_angle;

  SimilarityTransform t;
  t.angle = angle;
  t.scale = std::max(kMinScale, (a * std::cos(angle) + b * std::sin(angle)) / spread);
  const SimilarityTransform rot{t.scale, t.angle, {}};
  t.translation = md - rot(ms);
  return {t, residual(t, src, dst)};
}

double psi(const ChildGeometry& current, const ChildGeometry& exemplar, AngleBound bound) {
  if (!current.same_signature(exemplar)) throw std::invalid_argument("psi: child geometry signature mismatch");
  return -fit_constrained(exemplar.points, current.points, bound).residual;
}

}  // namespace hexpose
