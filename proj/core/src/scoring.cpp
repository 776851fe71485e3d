#include "hexpose/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hexpose {

WeightVector WeightVector::zeros(const PartHierarchy& h) { return uniform(h, 0.0, 0.0, 0.0, 0.0); }

WeightVector WeightVector::uniform(const PartHierarchy& h, double w_atomic, double alpha, double beta, double bias) {
  WeightVector w;
  w.bias = bias;
  w.atomic.assign(h.atomic_count(), w_atomic);
  w.alpha.assign(h.composite_count(), alpha);
  w.beta.assign(h.composite_count(), beta);
  return w;
}

std::vector<double> WeightVector::flatten() const {
  std::vector<double> v(atomic);
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    v.push_back(alpha[k]);
    v.push_back(beta[k]);
  }
  v.push_back(bias);
  return v;
}

WeightVector WeightVector::unflatten(const PartHierarchy& h, std::span<const double> v) {
  if (v.size() != feature_dimension(h)) throw std::invalid_argument("weight vector has the wrong dimension");
  WeightVector w;
  const std::size_t n = h.atomic_count();
  w.atomic.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
  for (std::size_t k = 0; k < h.composite_count(); ++k) {
    w.alpha.push_back(v[n + 2 * k]);
    w.beta.push_back(v[n + 2 * k + 1]);
  }
  w.bias = v.back();
  return w;
}

double level_scale(const PartHierarchy& h, std::span<const Point2> pose, int level) {
  return scale_for_size(object_size(pose), level, h.scale());
}

NodeTerms node_terms(const ScoringModel& m, std::span<const Point2> pose, NodeIndex node, std::size_t exemplar,
                     double size) {
  const PartHierarchy& h = m.hierarchy;
  const PartNode& n = h.node(node);
  const Exemplar& e = m.library.exemplars(h, node)[exemplar];
  std::vector<TypedLocation> children;
  children.reserve(n.children.size());
  for (std::size_t k = 0; k < n.children.size(); ++k) {
    const NodeIndex c = n.children[k];
    const Point2 at = h.node(c).is_atomic() ? pose[c] : anchor_point(pose, h, c);
    children.push_back({static_cast<std::uint32_t>(h.node(c).id), e.child_types[k], at});
  }
  const double s = scale_for_size(size, n.level - 1, h.scale());
  NodeTerms t;
  t.phi = n.level == 2 ? phi_pose_level2(m.maps, children, s) : phi_pose_upper(m.maps, children, s);
  t.psi = psi(child_geometry(h, pose, node), e.geometry, m.bounds.at(n.level));
  return t;
}

namespace {
constexpr double kPsiTieTolerance = 1e-9;
}  // namespace

PoseFit best_fit_pose(const ScoringModel& m, std::span<const Point2> pose, NodeIndex node) {
  const auto exemplars = m.library.exemplars(m.hierarchy, node);
  if (exemplars.empty())
    throw std::invalid_argument("no exemplars for part \"" + m.hierarchy.node(node).name + "\"");
  const ChildGeometry current = child_geometry(m.hierarchy, pose, node);
  const AngleBound bound = m.bounds.at(m.hierarchy.node(node).level);
  PoseFit best{0, psi(current, exemplars[0].geometry, bound)};
  for (std::size_t k = 1; k < exemplars.size(); ++k) {
    const double v = psi(current, exemplars[k].geometry, bound);
    // Exact fits differ only by rounding; those count as ties.
    if (v > best.psi + kPsiTieTolerance * std::max(1.0, std::abs(best.psi))) best = {k, v};
  }
  return best;
}

double psi_term(const ScoringModel& m, std::span<const Point2> pose, NodeIndex node, const WeightVector& w,
                std::optional<std::size_t> exemplar) {
  const std::size_t e = exemplar ? *exemplar : best_fit_pose(m, pose, node).exemplar;
  const NodeTerms t = node_terms(m, pose, node, e, object_size(pose));
  const std::size_t slot = m.hierarchy.composite_slot(node);
  return w.alpha[slot] * t.phi + w.beta[slot] * t.psi;
}

double appearance_term(const ScoringModel& m, std::span<const Point2> pose, const WeightVector& w) {
  const double s = level_scale(m.hierarchy, pose, 1);
  double total = 0.0;
  for (std::size_t i = 0; i < m.hierarchy.atomic_count(); ++i)
    total += w.atomic[i] * phi_atomic(m.maps, static_cast<std::uint32_t>(m.hierarchy.node(i).id), pose[i], s);
  return total;
}

double spatial_term(const ScoringModel& m, std::span<const Point2> pose, const WeightVector& w) {
  double total = 0.0;
  for (NodeIndex node : m.hierarchy.composite_nodes()) total += psi_term(m, pose, node, w);
  return total;
}

std::vector<double> feature_vector(const ScoringModel& m, std::span<const Point2> pose) {
  const PartHierarchy& h = m.hierarchy;
  std::vector<double> phi;
  phi.reserve(feature_dimension(h));
  const double size = object_size(pose);
  const double s = scale_for_size(size, 1, h.scale());
  for (std::size_t i = 0; i < h.atomic_count(); ++i)
    phi.push_back(phi_atomic(m.maps, static_cast<std::uint32_t>(h.node(i).id), pose[i], s));
  for (NodeIndex node : h.composite_nodes()) {
    const NodeTerms t = node_terms(m, pose, node, best_fit_pose(m, pose, node).exemplar, size);
    phi.push_back(t.phi);
    phi.push_back(t.psi);
  }
  phi.push_back(1.0);
  return phi;
}

double total_score(const ScoringModel& m, std::span<const Point2> pose, const WeightVector& w) {
  const std::vector<double> phi = feature_vector(m, pose);
  const std::vector<double> v = w.flatten();
  double total = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) total += v[k] * phi[k];
  return total;
}

bool Hypothesis::complete(const PartHierarchy& h) const {
  if (node >= h.node_count() || atoms.size() != h.atomic_count() || poses.size() != h.composite_count())
    return false;
  for (std::size_t i : h.subtree_atoms(node))
    if (!std::isfinite(atoms[i].x) || !std::isfinite(atoms[i].y)) return false;
  for (NodeIndex c : h.subtree_composites(node))
    if (poses[h.composite_slot(c)] < 0) return false;
  return true;
}

Hypothesis atomic_hypothesis(const PartHierarchy& h, std::size_t part, const Point2& location, double object_size) {
  Hypothesis hyp;
  hyp.node = part;
  hyp.level = 1;
  hyp.box = {location, location};
  hyp.object_size = object_size;
  hyp.atoms.assign(h.atomic_count(), Point2{});
  hyp.atoms[part] = location;
  hyp.poses.assign(h.composite_count(), -1);
  return hyp;
}

BoundingBox subtree_box(const PartHierarchy& h, const Hypothesis& hyp) {
  const auto atoms = h.subtree_atoms(hyp.node);
  BoundingBox b{hyp.atoms[atoms[0]], hyp.atoms[atoms[0]]};
  for (std::size_t i : atoms) {
    const Point2& p = hyp.atoms[i];
    b.top_left.x = std::min(b.top_left.x, p.x);
    b.top_left.y = std::min(b.top_left.y, p.y);
    b.bottom_right.x = std::max(b.bottom_right.x, p.x);
    b.bottom_right.y = std::max(b.bottom_right.y, p.y);
  }
  return b;
}

double recursive_score(const ScoringModel& m, const Hypothesis& hyp, const WeightVector& w) {
  const PartHierarchy& h = m.hierarchy;
  if (!hyp.complete(h)) throw std::invalid_argument("recursive_score: hypothesis subtree is incomplete");
  double total = 0.0;
  for (NodeIndex c : h.subtree_composites(hyp.node)) {
    const std::size_t slot = h.composite_slot(c);
    const NodeTerms t = node_terms(m, hyp.atoms, c, static_cast<std::size_t>(hyp.poses[slot]), hyp.object_size);
    total += w.alpha[slot] * t.phi + w.beta[slot] * t.psi;
  }
  return total;
}

RefinementModel refinement_model(const ScoringModel& m, const Hypothesis& root, const WeightVector& w) {
  const PartHierarchy& h = m.hierarchy;
  RefinementModel r;
  r.atomic_scale = scale_for_size(root.object_size, 1, h.scale());
  r.anchors = root.atoms;
  r.penalty.assign(h.atomic_count(), 0.0);
  for (NodeIndex c : h.subtree_composites(root.node)) {
    const PartNode& n = h.node(c);
    if (n.level != 2) continue;
    const std::size_t slot = h.composite_slot(c);
    const Exemplar& e = m.library.exemplars(h, c)[static_cast<std::size_t>(root.poses[slot])];
    const ChildGeometry current = child_geometry(h, root.atoms, c);
    const ConstrainedFit fit = fit_constrained(e.geometry.points, current.points, m.bounds.at(2));
    for (std::size_t k = 0; k < n.children.size(); ++k) {
      r.anchors[n.children[k]] = fit.transform(e.geometry.points[k]);
      r.penalty[n.children[k]] = w.beta[slot];
    }
  }
  r.offset = recursive_score(m, root, w) + w.bias;
  return r;
}

double refinement_objective(const ScoringModel& m, const RefinementModel& r, const WeightVector& w, std::size_t part,
                            const Point2& x) {
  const double phi = phi_atomic(m.maps, static_cast<std::uint32_t>(m.hierarchy.node(part).id), x, r.atomic_scale);
  return w.atomic[part] * phi - r.penalty[part] * squared_distance(x, r.anchors[part]);
}

double approx_score(const ScoringModel& m, const RefinementModel& r, const WeightVector& w,
                    std::span<const Point2> pose) {
  double total = r.offset;
  for (std::size_t i = 0; i < m.hierarchy.atomic_count(); ++i) total += refinement_objective(m, r, w, i, pose[i]);
  return total;
}

}  // namespace hexpose
