#include "hexpose/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hexpose/appearance.hpp"
#include "hexpose/error.hpp"

namespace hexpose {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void project(std::vector<double>& w) {
  for (std::size_t j = 0; j + 1 < w.size(); ++j) w[j] = std::max(w[j], 0.0);
}

Point2 centroid(std::span<const Point2> pts) {
  Point2 c;
  for (const Point2& p : pts) c += p;
  return (1.0 / static_cast<double>(pts.size())) * c;
}

void check_samples(std::span<const TrainingSample> samples) {
  if (samples.empty()) throw DegenerateInput("training set is empty");
  const std::size_t d = samples[0].features.size();
  bool pos = false;
  bool neg = false;
  for (const TrainingSample& s : samples) {
    if (s.features.size() != d || d == 0) throw DegenerateInput("training features have inconsistent dimension");
    if (s.label == 1)
      pos = true;
    else if (s.label == -1)
      neg = true;
    else
      throw DegenerateInput("training labels must be +1 or -1");
  }
  if (!pos || !neg) throw DegenerateInput("training set needs both positive and negative samples");
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t k = n; k > 1; --k) std::swap(order[k - 1], order[uniform_index(rng, k)]);
  return order;
}

TrainingResult train_subgradient(std::span<const TrainingSample> samples, const TrainingOptions& o) {
  const std::size_t n = samples.size();
  const std::size_t d = samples[0].features.size();
  const double lambda = 1.0 / (o.C * static_cast<double>(n));
  std::vector<double> w(d, 0.0);
  TrainingResult r;
  r.weights = w;
  r.objective = training_objective(samples, w, o.C);
  Rng rng = make_stream(o.seed, {0x5347});
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < o.epochs; ++epoch) {
    for (std::size_t i : shuffled(n, rng)) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const TrainingSample& s = samples[i];
      const double margin = s.label * dot(w, s.features);
      const double shrink = 1.0 - eta * lambda;
      for (double& v : w) v *= shrink;
      if (margin < 1.0)
        for (std::size_t j = 0; j < d; ++j) w[j] += eta * s.label * s.features[j];
      project(w);
    }
    const double obj = training_objective(samples, w, o.C);
    r.objective_trace.push_back(obj);
    if (obj < r.objective) {
      r.objective = obj;
      r.weights = w;
    }
  }
  r.epochs = o.epochs;
  return r;
}

/// Maximizes delta - 0.5 * sum_j q_j(v_j + delta a_j) over [lo, hi] where q_j
/// is x^2 for the bias and [x]_+^2 otherwise. The derivative is piecewise
/// linear and decreasing, so its root is found exactly between breakpoints.
double line_search(std::span<const double> v, std::span<const double> a, double lo, double hi) {
  const std::size_t d = v.size();
  auto derivative = [&](double delta) {
    double g = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = v[j] + delta * a[j];
      if (j + 1 == d || x > 0.0) g -= a[j] * x;
    }
    return g;
  };
  if (derivative(lo) <= 0.0) return lo;
  if (derivative(hi) >= 0.0) return hi;
  std::vector<double> points{lo, hi};
  for (std::size_t j = 0; j + 1 < d; ++j) {
    if (a[j] == 0.0) continue;
    const double b = -v[j] / a[j];
    if (b > lo && b < hi) points.push_back(b);
  }
  std::sort(points.begin(), points.end());
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    const double left = points[k];
    const double right = points[k + 1];
    const double gr = derivative(right);
    if (gr > 0.0) continue;
    // Linear on (left, right): evaluate slope from the active set at the midpoint.
    const double mid = 0.5 * (left + right);
    double intercept = 1.0;
    double slope = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = v[j] + mid * a[j];
      if (j + 1 == d || x > 0.0) {
        intercept -= a[j] * v[j];
        slope -= a[j] * a[j];
      }
    }
    if (slope == 0.0) return right;
    return std::clamp(-intercept / slope, left, right);
  }
  return hi;
}

TrainingResult train_dual(std::span<const TrainingSample> samples, const TrainingOptions& o) {
  const std::size_t n = samples.size();
  const std::size_t d = samples[0].features.size();
  std::vector<double> alpha(n, 0.0);
  std::vector<double> v(d, 0.0);  // sum alpha_i y_i x_i
  std::vector<double> a(d);
  Rng rng = make_stream(o.seed, {0x4443});
  TrainingResult r;
  const std::size_t max_sweeps = std::max<std::size_t>(o.epochs, 1) * 50;
  std::size_t sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double moved = 0.0;
    for (std::size_t i : shuffled(n, rng)) {
      const TrainingSample& s = samples[i];
      for (std::size_t j = 0; j < d; ++j) a[j] = s.label * s.features[j];
      const double delta = line_search(v, a, -alpha[i], o.C - alpha[i]);
      if (delta == 0.0) continue;
      alpha[i] += delta;
      for (std::size_t j = 0; j < d; ++j) v[j] += delta * a[j];
      moved = std::max(moved, std::abs(delta));
    }
    std::vector<double> w = v;
    project(w);
    r.objective_trace.push_back(training_objective(samples, w, o.C));
    if (moved < o.tolerance) {
      ++sweep;
      break;
    }
  }
  r.weights = v;
  project(r.weights);
  r.objective = training_objective(samples, r.weights, o.C);
  r.epochs = sweep;
  return r;
}

}  // namespace

ExemplarLibrary build_library(std::span<const Annotation> annotations, const PartHierarchy& h,
                              const RelationTypeModel& types) {
  std::vector<std::vector<Exemplar>> per_slot(h.composite_count());
  for (std::size_t r = 0; r < annotations.size(); ++r) {
    const Annotation& a = annotations[r];
    const auto pose = a.pose.span();
    if (pose.size() != h.atomic_count()) throw FormatError("annotation " + a.image + " has the wrong part count");
    const double size = object_size(pose);
    if (!(size > 0.0)) throw DegenerateInput("degenerate annotation " + a.image + ": all points identical");
    const TypeLabels labels = label_configuration(h, types, pose);
    for (std::size_t s = 0; s < h.composite_count(); ++s) {
      const NodeIndex node = h.composite_node(s);
      Exemplar e;
      e.source = a.image;
      e.object_size = size;
      e.geometry = child_geometry(h, pose, node);
      for (NodeIndex c : h.node(node).children)
        e.child_types.push_back(h.node(c).is_atomic() ? labels.atomic[c] : labels.composite[h.composite_slot(c)]);
      for (std::size_t i : h.subtree_atoms(node)) e.atoms.push_back(pose[i]);
      e.subtree_poses.assign(h.subtree_composites(node).size(), static_cast<std::uint32_t>(r));
      per_slot[s].push_back(std::move(e));
    }
  }
  return ExemplarLibrary(h, types, std::move(per_slot));
}

ExemplarLibrary fit_library(std::span<const Annotation> annotations, const PartHierarchy& h,
                            const LibraryOptions& options) {
  if (annotations.empty()) throw DegenerateInput("cannot build a library from zero annotations");
  std::vector<Configuration> poses;
  for (const Annotation& a : annotations) poses.push_back(a.pose);
  const std::size_t clusters = std::min(options.composite_types, poses.size());
  const RelationTypeModel types = fit_type_models(h, poses, options.atomic_bins, clusters, options.seed);
  return build_library(annotations, h, types);
}

std::vector<Annotation> transform_annotations(std::span<const Annotation> annotations,
                                              std::span<const double> angles, bool mirror) {
  std::vector<Annotation> out;
  for (const Annotation& a : annotations) {
    const Point2 c = centroid(a.pose.span());
    for (int m = 0; m < (mirror ? 2 : 1); ++m) {
      for (double angle : angles) {
        Annotation b = a;
        const double cs = std::cos(angle);
        const double sn = std::sin(angle);
        for (Point2& p : b.pose.points) {
          Point2 q = p - c;
          if (m == 1) q.x = -q.x;
          p = c + Point2{cs * q.x - sn * q.y, sn * q.x + cs * q.y};
        }
        out.push_back(std::move(b));
      }
    }
  }
  return out;
}

std::vector<Annotation> augment_positives(std::span<const Annotation> annotations, Rng& rng, double jitter_fraction,
                                          std::size_t copies) {
  if (!(jitter_fraction >= 0.0)) throw std::invalid_argument("jitter_fraction must be non-negative");
  std::vector<Annotation> out;
  for (const Annotation& a : annotations) {
    const double radius = jitter_fraction * object_size(a.pose.span());
    for (std::size_t k = 0; k < copies; ++k) {
      Annotation b = a;
      if (radius > 0.0) {
        for (Point2& p : b.pose.points) {
          const double r = radius * std::sqrt(uniform_real(rng, 0.0, 1.0));
          const double t = uniform_real(rng, 0.0, 2.0 * kPi);
          p += Point2{r * std::cos(t), r * std::sin(t)};
        }
      }
      out.push_back(std::move(b));
    }
  }
  return out;
}

NegativeSet generate_negatives(std::span<const Annotation> annotations, Rng& rng, const NegativeOptions& options) {
  NegativeSet out;
  for (const Annotation& a : annotations) {
    const BoundingBox truth = bounding_box(a.pose.span());
    const double sigma = options.noise_fraction * truth.mean_side();
    const double lo_x = -truth.top_left.x;
    const double hi_x = a.width - truth.bottom_right.x;
    const double lo_y = -truth.top_left.y;
    const double hi_y = a.height - truth.bottom_right.y;
    bool placed = false;
    if (lo_x <= hi_x && lo_y <= hi_y) {
      for (std::size_t attempt = 0; attempt < options.max_tries && !placed; ++attempt) {
        const Point2 shift{lo_x == hi_x ? lo_x : uniform_real(rng, lo_x, hi_x),
                           lo_y == hi_y ? lo_y : uniform_real(rng, lo_y, hi_y)};
        Annotation b = a;
        for (Point2& p : b.pose.points) {
          p += shift;
          if (sigma > 0.0) p += Point2{sigma * standard_normal(rng), sigma * standard_normal(rng)};
        }
        if (intersection_over_union(bounding_box(b.pose.span()), truth) < options.max_iou) {
          out.samples.push_back(std::move(b));
          placed = true;
        }
      }
    }
    if (!placed) out.warnings.push_back("image " + a.image + " too small to place a negative; skipped");
  }
  return out;
}

double training_objective(std::span<const TrainingSample> samples, std::span<const double> w, double C) {
  double obj = 0.5 * dot(w, w);
  for (const TrainingSample& s : samples) obj += C * std::max(0.0, 1.0 - s.label * dot(w, s.features));
  return obj;
}

double training_accuracy(std::span<const TrainingSample> samples, std::span<const double> w) {
  std::size_t ok = 0;
  for (const TrainingSample& s : samples) {
    const double v = dot(w, s.features);
    ok += (s.label == 1) == (v > 0.0) ? 1 : 0;
  }
  return samples.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(samples.size());
}

std::size_t satisfied_margins(std::span<const TrainingSample> samples, std::span<const double> w, double tolerance) {
  std::size_t n = 0;
  for (const TrainingSample& s : samples) n += s.label * dot(w, s.features) >= 1.0 - tolerance ? 1 : 0;
  return n;
}

TrainingResult train_weights(std::span<const TrainingSample> samples, const TrainingOptions& options) {
  check_samples(samples);
  if (!(options.C > 0.0)) throw std::invalid_argument("C must be positive");
  TrainingResult r =
      options.solver == Solver::Subgradient ? train_subgradient(samples, options) : train_dual(samples, options);
  r.accuracy = training_accuracy(samples, r.weights);
  return r;
}

}  // namespace hexpose
