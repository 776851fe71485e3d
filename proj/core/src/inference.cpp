#include "hexpose/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hexpose/error.hpp"
#include "hexpose/random.hpp"

namespace hexpose {
namespace {

/// Offset of child k's leading point (the atom, or the anchor) in the geometry.
std::vector<std::size_t> child_offsets(const PartHierarchy& h, NodeIndex node) {
  std::vector<std::size_t> off;
  std::size_t at = 0;
  for (NodeIndex c : h.node(node).children) {
    off.push_back(at);
    at += h.node(c).is_atomic() ? 1 : 3;
  }
  return off;
}

Point2 child_location(const PartHierarchy& h, const Hypothesis& hyp, NodeIndex child) {
  return h.node(child).is_atomic() ? hyp.atoms[child] : anchor_point(hyp.atoms, h, child);
}

std::vector<double> identity_key(const PartHierarchy& h, const Hypothesis& hyp, NodeIndex node) {
  std::vector<double> key;
  for (std::size_t i : h.subtree_atoms(node)) {
    key.push_back(hyp.atoms[i].x);
    key.push_back(hyp.atoms[i].y);
  }
  for (NodeIndex c : h.subtree_composites(node)) key.push_back(hyp.poses[h.composite_slot(c)]);
  return key;
}

bool same_subtree(const PartHierarchy& h, const Hypothesis& a, const Hypothesis& b, NodeIndex node) {
  for (std::size_t i : h.subtree_atoms(node))
    if (!(a.atoms[i] == b.atoms[i])) return false;
  for (NodeIndex c : h.subtree_composites(node))
    if (a.poses[h.composite_slot(c)] != b.poses[h.composite_slot(c)]) return false;
  return true;
}

BoundingBox node_box(const PartHierarchy& h, const Hypothesis& hyp, NodeIndex node) {
  return tight_box(hyp.atoms, h, node);
}

}  // namespace

std::string_view mode_name(InferenceMode mode) {
  switch (mode) {
    case InferenceMode::Full: return "full";
    case InferenceMode::Partial: return "partial";
    case InferenceMode::NoHier: return "no-hier";
  }
  return "full";
}

InferenceMode parse_mode(std::string_view name) {
  if (name == "full") return InferenceMode::Full;
  if (name == "partial") return InferenceMode::Partial;
  if (name == "no-hier") return InferenceMode::NoHier;
  throw std::invalid_argument("unknown mode \"" + std::string(name) + "\" (expected full, partial or no-hier)");
}

void InferenceParams::validate() const {
  auto fraction = [](double v, const char* what) {
    if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + " must lie in (0, 1]");
  };
  if (max_hypotheses < 1) throw std::invalid_argument("max_hypotheses must be at least 1");
  fraction(search_radius_fraction, "search_radius_fraction");
  if (!(compatibility_tolerance >= 0.0 && compatibility_tolerance <= 1.0))
    throw std::invalid_argument("compatibility_tolerance must lie in [0, 1]");
  if (!(dedup_radius >= 0.0)) throw std::invalid_argument("dedup_radius must be non-negative");
  if (!(nms_radius >= 0.0)) throw std::invalid_argument("nms_radius must be non-negative");
  if (!(seed_scale > 0.0)) throw std::invalid_argument("seed_scale must be positive");
}

NodeHypotheses seed_level1(const ScoringModel& m, const InferenceParams& p) {
  const PartHierarchy& h = m.hierarchy;
  NodeHypotheses out(h.node_count());
  for (std::size_t i = 0; i < h.atomic_count(); ++i) {
    const auto peaks =
        top_peaks(m.maps, static_cast<std::uint32_t>(h.node(i).id), p.seed_scale, p.max_hypotheses, p.nms_radius);
    for (const Peak& pk : peaks) {
      Hypothesis hyp = atomic_hypothesis(h, i, pk.location, 0.0);
      out[i].push_back(std::move(hyp));
    }
  }
  return out;
}

std::vector<Hypothesis> propose(const ScoringModel& m, NodeIndex node, const NodeHypotheses& lower,
                                const InferenceParams& p) {
  const PartHierarchy& h = m.hierarchy;
  const PartNode& n = h.node(node);
  const auto exemplars = m.library.exemplars(h, node);
  std::vector<std::size_t> available;
  for (std::size_t k = 0; k < n.children.size(); ++k)
    if (!lower[n.children[k]].empty()) available.push_back(k);
  const std::size_t needed = n.level == 2 ? 2 : 1;
  if (exemplars.empty() || available.size() < needed) return {};

  const std::vector<std::size_t> offsets = child_offsets(h, node);
  const AngleBound bound = m.bounds.at(n.level);
  const auto atoms = h.subtree_atoms(node);
  const auto composites = h.subtree_composites(node);
  std::vector<Hypothesis> out;
  std::set<std::vector<double>> seen;

  for (std::size_t d = 0; d < p.draws(); ++d) {
    Rng rng = make_stream(p.seed, {static_cast<std::uint64_t>(n.level), static_cast<std::uint64_t>(n.id), d});
    const Exemplar& e = exemplars[uniform_index(rng, exemplars.size())];
    const std::size_t e_index = static_cast<std::size_t>(&e - exemplars.data());
    SimilarityTransform t;
    if (available.size() >= 2) {
      const std::size_t a = uniform_index(rng, available.size());
      std::size_t b = uniform_index(rng, available.size() - 1);
      if (b >= a) ++b;
      const std::size_t ka = available[a];
      const std::size_t kb = available[b];
      const auto& la = lower[n.children[ka]];
      const auto& lb = lower[n.children[kb]];
      const Hypothesis& ha = la[uniform_index(rng, la.size())];
      const Hypothesis& hb = lb[uniform_index(rng, lb.size())];
      try {
        t = fit_two_points(e.geometry.points[offsets[ka]], e.geometry.points[offsets[kb]],
                           child_location(h, ha, n.children[ka]), child_location(h, hb, n.children[kb]));
      } catch (const DegenerateInput&) {
        continue;
      }
      if (std::abs(t.angle) > bound.max_abs_angle) continue;
    } else {
      const std::size_t k = available[0];
      const auto& l = lower[n.children[k]];
      const Hypothesis& hk = l[uniform_index(rng, l.size())];
      t.angle = 0.0;
      t.scale = hk.object_size / e.object_size;
      if (!(t.scale > 0.0)) continue;
      t.translation = child_location(h, hk, n.children[k]) - t.scale * e.geometry.points[offsets[k]];
    }

    Hypothesis hyp;
    hyp.node = node;
    hyp.level = n.level;
    hyp.object_size = e.object_size * t.scale;
    hyp.atoms.assign(h.atomic_count(), Point2{});
    for (std::size_t k = 0; k < atoms.size(); ++k) hyp.atoms[atoms[k]] = t(e.atoms[k]);
    hyp.poses.assign(h.composite_count(), -1);
    for (std::size_t k = 0; k < composites.size(); ++k)
      hyp.poses[h.composite_slot(composites[k])] = static_cast<std::int32_t>(e.subtree_poses[k]);
    hyp.poses[h.composite_slot(node)] = static_cast<std::int32_t>(e_index);
    hyp.box = node_box(h, hyp, node);
    if (!seen.insert(identity_key(h, hyp, node)).second) continue;
    out.push_back(std::move(hyp));
  }
  return out;
}

std::vector<Hypothesis> augment_swap(const ScoringModel& m, std::span<const Hypothesis> hyps,
                                     const NodeHypotheses& lower, const InferenceParams& p) {
  const PartHierarchy& h = m.hierarchy;
  std::vector<Hypothesis> out;
  for (const Hypothesis& original : hyps) {
    const std::size_t first = out.size();
    out.push_back(original);
    for (NodeIndex c : h.node(original.node).children) {
      if (h.node(c).is_atomic()) continue;
      const std::size_t end = out.size();
      for (std::size_t v = first; v < end; ++v) {
        const BoundingBox current = node_box(h, out[v], c);
        const double tol = p.compatibility_tolerance * out[v].object_size;
        std::size_t swaps = 0;
        for (const Hypothesis& alt : lower[c]) {
          if (swaps >= p.max_swaps_per_slot) break;
          if (distance(alt.box.top_left, current.top_left) > tol ||
              distance(alt.box.bottom_right, current.bottom_right) > tol)
            continue;
          if (same_subtree(h, alt, out[v], c)) continue;
          Hypothesis swapped = out[v];
          for (std::size_t i : h.subtree_atoms(c)) swapped.atoms[i] = alt.atoms[i];
          for (NodeIndex s : h.subtree_composites(c))
            swapped.poses[h.composite_slot(s)] = alt.poses[h.composite_slot(s)];
          swapped.box = node_box(h, swapped, swapped.node);
          out.push_back(std::move(swapped));
          ++swaps;
        }
      }
    }
  }
  return out;
}

std::vector<Hypothesis> evaluate_prune(const ScoringModel& m, std::vector<Hypothesis> hyps, const WeightVector& w,
                                       std::size_t max_hypotheses, double dedup_radius) {
  const PartHierarchy& h = m.hierarchy;
  for (Hypothesis& hyp : hyps) hyp.score = recursive_score(m, hyp, w);
  std::vector<std::size_t> order(hyps.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return hyps[a].score > hyps[b].score; });
  const double r2 = dedup_radius * dedup_radius;
  std::vector<Hypothesis> kept;
  for (std::size_t idx : order) {
    if (kept.size() >= max_hypotheses) break;
    const Hypothesis& cand = hyps[idx];
    const auto atoms = h.subtree_atoms(cand.node);
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](const Hypothesis& k) {
      return std::all_of(atoms.begin(), atoms.end(),
                         [&](std::size_t i) { return squared_distance(k.atoms[i], cand.atoms[i]) <= r2; });
    });
    if (!duplicate) kept.push_back(std::move(hyps[idx]));
  }
  return kept;
}

BacktrackResult backtrack(const ScoringModel& m, const Hypothesis& root, const WeightVector& w,
                          const InferenceParams& p) {
  const PartHierarchy& h = m.hierarchy;
  const RefinementModel r = refinement_model(m, root, w);
  BacktrackResult out;
  out.radius = p.search_radius_fraction * root.box.mean_side();
  out.pose = Configuration(root.atoms);
  out.initial_score = approx_score(m, r, w, root.atoms);
  const double r2 = out.radius * out.radius;
  for (std::size_t i = 0; i < h.atomic_count(); ++i) {
    const Point2 center = root.atoms[i];
    Point2 best = center;
    double best_value = refinement_objective(m, r, w, i, center);
    double best_d2 = 0.0;
    const long row0 = static_cast<long>(std::ceil(center.y - out.radius));
    const long row1 = static_cast<long>(std::floor(center.y + out.radius));
    const long col0 = static_cast<long>(std::ceil(center.x - out.radius));
    const long col1 = static_cast<long>(std::floor(center.x + out.radius));
    for (long row = row0; row <= row1; ++row) {
      for (long col = col0; col <= col1; ++col) {
        const Point2 x{static_cast<double>(col), static_cast<double>(row)};
        const double d2 = squared_distance(x, center);
        if (d2 > r2) continue;
        const double v = refinement_objective(m, r, w, i, x);
        if (v > best_value || (v == best_value && d2 < best_d2)) {
          best = x;
          best_value = v;
          best_d2 = d2;
        }
      }
    }
    out.pose[i] = best;
  }
  out.score = approx_score(m, r, w, out.pose.span());
  return out;
}

std::string diagnostics_jsonl(const InferenceResult& r, InferenceMode mode) {
  std::string text;
  for (const LevelDiagnostics& d : r.levels) {
    const nlohmann::json j{{"level", d.level},
                           {"proposed", d.proposed},
                           {"augmented", d.augmented},
                           {"kept", d.kept},
                           {"best_score", d.best_score}};
    text += j.dump() + "\n";
  }
  const nlohmann::json summary{{"mode", std::string(mode_name(mode))},
                               {"roots", r.roots},
                               {"score", r.score},
                               {"partial_score", r.partial_score}};
  text += summary.dump() + "\n";
  return text;
}

WeightVector collapse_weights(const PartHierarchy& original, const WeightVector& w) {
  WeightVector c;
  c.bias = w.bias;
  c.atomic = w.atomic;
  double alpha = 0.0;
  double beta = 0.0;
  const auto level2 = original.level_nodes(2);
  for (NodeIndex n : level2) {
    alpha += w.alpha[original.composite_slot(n)];
    beta += w.beta[original.composite_slot(n)];
  }
  c.alpha = {alpha / static_cast<double>(level2.size())};
  c.beta = {beta / static_cast<double>(level2.size())};
  return c;
}

InferenceResult infer(const ScoringModel& m, const WeightVector& w, const InferenceParams& p) {
  p.validate();
  if (p.mode == InferenceMode::NoHier && m.hierarchy.levels() > 2) {
    const PartHierarchy flat = m.hierarchy.collapsed();
    const ExemplarLibrary flat_library = collapse_library(m.hierarchy, flat, m.library);
    const ScoringModel flat_model{flat, flat_library, m.maps, m.bounds};
    return infer(flat_model, collapse_weights(m.hierarchy, w), p);
  }

  const PartHierarchy& h = m.hierarchy;
  NodeHypotheses hyps = seed_level1(m, p);
  for (std::size_t i = 0; i < h.atomic_count(); ++i)
    if (hyps[i].empty()) throw NoConfiguration("no configuration found: no peaks for part \"" + h.node(i).name + "\"");

  InferenceResult result;
  for (int level = 2; level <= h.levels(); ++level) {
    LevelDiagnostics diag;
    diag.level = level;
    diag.best_score = -std::numeric_limits<double>::infinity();
    for (NodeIndex node : h.level_nodes(level)) {
      std::vector<Hypothesis> raw = propose(m, node, hyps, p);
      diag.proposed += raw.size();
      if (level > 2) raw = augment_swap(m, raw, hyps, p);
      diag.augmented += raw.size();
      hyps[node] = evaluate_prune(m, std::move(raw), w, p.max_hypotheses, p.dedup_radius);
      if (hyps[node].empty())
        throw NoConfiguration("no configuration found: no hypotheses for part \"" + h.node(node).name + "\"");
      diag.kept += hyps[node].size();
      diag.best_score = std::max(diag.best_score, hyps[node].front().score);
    }
    result.levels.push_back(diag);
  }

  const std::vector<Hypothesis>& roots = hyps[h.root()];
  result.roots = roots.size();
  result.partial_pose = Configuration(roots.front().atoms);
  result.partial_score = approx_score(m, refinement_model(m, roots.front(), w), w, roots.front().atoms);
  if (p.mode == InferenceMode::Partial) {
    result.pose = result.partial_pose;
    result.score = result.partial_score;
    return result;
  }
  bool have = false;
  for (const Hypothesis& root : roots) {
    BacktrackResult b = backtrack(m, root, w, p);
    if (!have || b.score > result.score) {
      result.pose = std::move(b.pose);
      result.score = b.score;
      have = true;
    }
  }
  return result;
}

}  // namespace hexpose
