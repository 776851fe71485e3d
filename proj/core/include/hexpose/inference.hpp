#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hexpose/scoring.hpp"

namespace hexpose {

enum class InferenceMode { Full, Partial, NoHier };

std::string_view mode_name(InferenceMode mode);
/// "full", "partial" or "no-hier"; throws std::invalid_argument otherwise.
InferenceMode parse_mode(std::string_view name);

struct InferenceParams {
  std::size_t max_hypotheses{50};       // Z, per part
  std::size_t samples_per_level{0};     // alignment draws per part; 0 means 20 * Z
  std::uint64_t seed{0};
  double compatibility_tolerance{0.1};  // fraction of object size
  double dedup_radius{2.0};             // pixels
  double nms_radius{2.0};               // pixels, for seeding peaks
  double search_radius_fraction{0.15};  // of the root box mean side
  std::size_t max_swaps_per_slot{3};
  double seed_scale{1.0};               // detection scale used for seeding
  InferenceMode mode{InferenceMode::Full};

  std::size_t draws() const { return samples_per_level == 0 ? 20 * max_hypotheses : samples_per_level; }
  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

/// Hypothesis lists indexed by node.
using NodeHypotheses = std::vector<std::vector<Hypothesis>>;

/// Top-Z peaks per atomic part as level-1 hypotheses.
NodeHypotheses seed_level1(const ScoringModel& m, const InferenceParams& p);

/// Aligns randomly drawn exemplars of `node` to hypotheses of its children.
/// Draw d uses the stream (seed, level, node, d). Exact duplicates are dropped.
std::vector<Hypothesis> propose(const ScoringModel& m, NodeIndex node, const NodeHypotheses& lower,
                                const InferenceParams& p);

/// For every hypothesis and child slot, adds variants whose child subtree is
/// replaced by a compatible lower hypothesis. Originals come first.
std::vector<Hypothesis> augment_swap(const ScoringModel& m, std::span<const Hypothesis> hyps,
                                     const NodeHypotheses& lower, const InferenceParams& p);

/// Scores with recursive_score, sorts descending (stable), drops near
/// duplicates of better hypotheses and keeps at most Z.
std::vector<Hypothesis> evaluate_prune(const ScoringModel& m, std::vector<Hypothesis> hyps, const WeightVector& w,
                                       std::size_t max_hypotheses, double dedup_radius);

struct BacktrackResult {
  Configuration pose;
  double initial_score{0.0};  // g before refinement
  double score{0.0};          // g after refinement
  double radius{0.0};
};

/// Per-part exhaustive search over the integer pixels of a disc (plus the
/// starting point) maximizing the refinement objective.
BacktrackResult backtrack(const ScoringModel& m, const Hypothesis& root, const WeightVector& w,
                          const InferenceParams& p);

struct LevelDiagnostics {
  int level{0};
  std::size_t proposed{0};
  std::size_t augmented{0};
  std::size_t kept{0};
  double best_score{0.0};
};

struct InferenceResult {
  Configuration pose;
  double score{0.0};
  Configuration partial_pose;  // atoms of the best root hypothesis, unrefined
  double partial_score{0.0};   // g of that hypothesis
  std::size_t roots{0};
  std::vector<LevelDiagnostics> levels;
};

/// One JSON object per level, then a summary line.
std::string diagnostics_jsonl(const InferenceResult& r, InferenceMode mode);

/// Root alpha and beta become the means over level-2 parts.
WeightVector collapse_weights(const PartHierarchy& original, const WeightVector& w);

/// Throws NoConfiguration when some part ends up with no hypotheses.
InferenceResult infer(const ScoringModel& m, const WeightVector& w, const InferenceParams& p);

}  // namespace hexpose
