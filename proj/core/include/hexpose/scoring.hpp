#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hexpose/appearance.hpp"
#include "hexpose/geometry.hpp"
#include "hexpose/hierarchy.hpp"
#include "hexpose/library.hpp"

namespace hexpose {

/// Weights of the linear score. Everything but the bias is non-negative.
struct WeightVector {
  double bias{0.0};
  std::vector<double> atomic;  // per atomic part
  std::vector<double> alpha;   // per composite slot
  std::vector<double> beta;    // per composite slot

  static WeightVector zeros(const PartHierarchy& h);
  static WeightVector uniform(const PartHierarchy& h, double w_atomic, double alpha, double beta, double bias = 0.0);
  /// [w_i...; (alpha_k, beta_k)...; w0], the feature-vector layout.
  std::vector<double> flatten() const;
  static WeightVector unflatten(const PartHierarchy& h, std::span<const double> v);
  std::size_t dimension() const { return atomic.size() + 2 * alpha.size() + 1; }
};

/// Read-only view of everything the score depends on.
struct ScoringModel {
  const PartHierarchy& hierarchy;
  const ExemplarLibrary& library;
  const ScoreMapStack& maps;
  AngleBounds bounds{};
};

inline std::size_t feature_dimension(const PartHierarchy& h) {
  return h.atomic_count() + 2 * h.composite_count() + 1;
}

/// s^(l)(X) from the object size of the configuration.
double level_scale(const PartHierarchy& h, std::span<const Point2> pose, int level);

struct PoseFit {
  std::size_t exemplar{0};
  double psi{0.0};
};

/// argmax over the node's exemplars of psi; ties go to the lowest index.
/// Throws std::invalid_argument for an empty library.
PoseFit best_fit_pose(const ScoringModel& m, std::span<const Point2> pose, NodeIndex node);

/// The (phi, psi) pair of one composite node for a fixed exemplar, with phi
/// evaluated at s^(l-1) derived from `size`.
struct NodeTerms {
  double phi{0.0};
  double psi{0.0};
};
NodeTerms node_terms(const ScoringModel& m, std::span<const Point2> pose, NodeIndex node, std::size_t exemplar,
                     double size);

/// alpha * phi + beta * psi at one composite node; best-fit exemplar when none is given.
double psi_term(const ScoringModel& m, std::span<const Point2> pose, NodeIndex node, const WeightVector& w,
                std::optional<std::size_t> exemplar = std::nullopt);

double appearance_term(const ScoringModel& m, std::span<const Point2> pose, const WeightVector& w);
double spatial_term(const ScoringModel& m, std::span<const Point2> pose, const WeightVector& w);
std::vector<double> feature_vector(const ScoringModel& m, std::span<const Point2> pose);
double total_score(const ScoringModel& m, std::span<const Point2> pose, const WeightVector& w);

/// A scored candidate for one part together with its assigned subtree.
struct Hypothesis {
  NodeIndex node{kNoNode};
  int level{1};
  BoundingBox box;
  double object_size{0.0};
  std::vector<Point2> atoms;         // every atomic part; only subtree entries are meaningful
  std::vector<std::int32_t> poses;   // exemplar per composite slot; -1 outside the subtree
  double score{0.0};

  /// Atomic indices and composite nodes this hypothesis owns.
  bool complete(const PartHierarchy& h) const;
};

/// Wraps an atomic location as a level-1 hypothesis with f = 0.
Hypothesis atomic_hypothesis(const PartHierarchy& h, std::size_t part, const Point2& location, double object_size);

/// Box of the hypothesis's subtree atoms.
BoundingBox subtree_box(const PartHierarchy& h, const Hypothesis& hyp);

/// f(b): sum of Psi over the subtree's composite nodes using the stored
/// exemplars; 0 for atomic hypotheses. Throws std::invalid_argument when the
/// subtree is incomplete.
double recursive_score(const ScoringModel& m, const Hypothesis& hyp, const WeightVector& w);

/// Frozen quantities for re-scoring a root hypothesis during refinement.
struct RefinementModel {
  double atomic_scale{1.0};        // s^(1) of the hypothesis configuration
  std::vector<Point2> anchors;     // exemplar-aligned location per atomic part
  std::vector<double> penalty;     // beta of the level-2 parent per atomic part
  double offset{0.0};              // f(root) + w0
};
RefinementModel refinement_model(const ScoringModel& m, const Hypothesis& root, const WeightVector& w);

/// Contribution of one atomic part to g at location x.
double refinement_objective(const ScoringModel& m, const RefinementModel& r, const WeightVector& w, std::size_t part,
                            const Point2& x);

/// g: U at frozen scale, minus the anchor penalties, plus f(root) + w0.
double approx_score(const ScoringModel& m, const RefinementModel& r, const WeightVector& w,
                    std::span<const Point2> pose);

}  // namespace hexpose
