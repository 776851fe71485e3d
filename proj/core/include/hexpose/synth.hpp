#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hexpose/appearance.hpp"
#include "hexpose/io.hpp"
#include "hexpose/library.hpp"
#include "hexpose/random.hpp"
#include "hexpose/scoring.hpp"

namespace hexpose {

/// Random poses laid out radially: each composite part spreads its children
/// around its center, with per-pose jitter on angles and radii.
struct LayoutOptions {
  double image_width{128.0};
  double image_height{128.0};
  double object_size{60.0};     // mean side of the pose box, pixels
  double angle_jitter{0.35};    // radians, standard deviation
  double radius_jitter{0.2};    // relative, uniform
  double rotation_range{0.15};  // global rotation, uniform in [-r, r]
};

std::vector<Annotation> random_annotations(const PartHierarchy& h, std::size_t count, std::uint64_t seed,
                                           const LayoutOptions& options = {});

struct PlacementOptions {
  Point2 center{64.0, 64.0};
  double shift{4.0};            // uniform jitter of the center, pixels
  double object_size{60.0};
  double rotation_range{0.15};  // radians
};

struct GeneratedPose {
  Configuration pose;
  std::vector<std::size_t> exemplars;  // chosen exemplar per composite slot
};

/// Top-down sampling: a root exemplar placed by a random similarity, then for
/// every composite child an exemplar (any when mixing, otherwise the one from
/// the same annotation) fitted onto the anchor and box its parent predicts.
GeneratedPose generate_pose(const PartHierarchy& h, const ExemplarLibrary& library, Rng& rng, bool mix,
                            const PlacementOptions& placement = {});

struct RenderOptions {
  std::uint32_t width{128};
  std::uint32_t height{128};
  double sigma{1.5};               // atomic bump width, pixels
  double amplitude{10.0};          // bump height relative to the background channel
  double base{1e-3};               // floor of every part channel
  std::size_t distractors{0};      // extra bumps per part at random places and types
  double distractor_amplitude{0.5};  // relative to amplitude
  double noise{0.0};               // uniform [0, noise] added to part channels
  double composite_amplitude{0.9};   // type mass at the anchor
  double composite_sigma{4.0};
};

/// Stack with one atomic layer at s^(1) of X and one composite layer per
/// composite part below the root at its own level scale.
ScoreMapStack render_score_maps(const PartHierarchy& h, const RelationTypeModel& types, const Configuration& x,
                                const RenderOptions& options, Rng& rng);

struct SceneOptions {
  bool mix{false};
  PlacementOptions placement;
  RenderOptions render;
};

struct SynthScene {
  std::uint64_t seed{0};
  Annotation truth;  // locations rounded to integer pixels
  ScoreMapStack maps;
  nlohmann::json provenance;
};

SynthScene make_scene(const PartHierarchy& h, const ExemplarLibrary& library, const SceneOptions& options,
                      std::uint64_t seed);

/// Writes scene_<seed>.json, scene_<seed>.hpsm and scene_<seed>.provenance.json.
void write_scene_bundle(const std::filesystem::path& dir, const SynthScene& scene, const PartHierarchy& h);

struct OracleLattice {
  double scale_min{0.5};
  double scale_max{2.0};
  double scale_step{0.02};
  double angle_step{0.01};
};

/// Independent minimization of the similarity residual: a (scale, angle)
/// lattice with the closed-form translation, refined by compass search.
double oracle_psi(std::span<const Point2> current, std::span<const Point2> exemplar, double max_abs_angle,
                  const OracleLattice& lattice = {});

struct OracleOptimum {
  Configuration pose;
  double score{0.0};
  std::size_t evaluated{0};
};

/// Exhaustive maximization of total_score over the Cartesian product of
/// per-part candidates; ties go to the lexicographically smallest pose.
/// Throws std::invalid_argument past `budget` configurations.
OracleOptimum oracle_best_config(const ScoringModel& m, const WeightVector& w,
                                 std::span<const std::vector<Point2>> candidates, std::size_t budget = 10'000'000);

}  // namespace hexpose
