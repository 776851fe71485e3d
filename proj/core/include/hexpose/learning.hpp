#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hexpose/io.hpp"
#include "hexpose/library.hpp"
#include "hexpose/random.hpp"

namespace hexpose {

struct LibraryOptions {
  std::uint32_t atomic_bins{12};
  std::size_t composite_types{24};  // capped at the number of annotations
  std::uint64_t seed{0};            // k-means initialization
};

/// One exemplar per annotation for every composite part. Throws
/// DegenerateInput for annotations with zero extent or coincident siblings.
ExemplarLibrary build_library(std::span<const Annotation> annotations, const PartHierarchy& h,
                              const RelationTypeModel& types);

/// Fits the relation-type model on the annotations, then builds the library.
ExemplarLibrary fit_library(std::span<const Annotation> annotations, const PartHierarchy& h,
                            const LibraryOptions& options = {});

/// Rotated (about the pose centroid) and optionally mirrored copies; the
/// result has angles.size() * (mirror ? 2 : 1) entries per input.
std::vector<Annotation> transform_annotations(std::span<const Annotation> annotations,
                                              std::span<const double> angles, bool mirror);

/// `copies` perturbed versions of each pose; every part moves uniformly
/// within a disc of radius jitter_fraction * object size.
std::vector<Annotation> augment_positives(std::span<const Annotation> annotations, Rng& rng, double jitter_fraction,
                                          std::size_t copies = 1);

struct NegativeOptions {
  double max_iou{0.3};         // against the true object box
  double noise_fraction{0.02};  // Gaussian sigma as a fraction of object size
  std::size_t max_tries{100};
};

struct NegativeSet {
  std::vector<Annotation> samples;
  std::vector<std::string> warnings;  // one per skipped annotation
};

/// Poses translated into the image so the object box overlaps the original
/// by less than max_iou, plus per-part Gaussian noise.
NegativeSet generate_negatives(std::span<const Annotation> annotations, Rng& rng, const NegativeOptions& options = {});

struct TrainingSample {
  std::vector<double> features;  // the last entry multiplies the bias
  int label{1};                  // +1 or -1
};

enum class Solver { Subgradient, DualCoordinate };

struct TrainingOptions {
  double C{1.0};
  std::size_t epochs{200};
  std::uint64_t seed{0};
  Solver solver{Solver::Subgradient};
  double tolerance{1e-6};  // dual solver stops when no coordinate moves further
};

struct TrainingResult {
  std::vector<double> weights;  // every entry but the last is >= 0
  double objective{0.0};
  double accuracy{0.0};
  std::size_t epochs{0};
  std::vector<double> objective_trace;  // per epoch
};

/// Minimizes 0.5 |w|^2 + C sum hinge(y <w, x>) subject to w_j >= 0 for all
/// but the bias. Throws DegenerateInput for single-class data.
TrainingResult train_weights(std::span<const TrainingSample> samples, const TrainingOptions& options = {});

double training_objective(std::span<const TrainingSample> samples, std::span<const double> w, double C);
/// Fraction with sign(<w, x>) == y; zero counts as negative.
double training_accuracy(std::span<const TrainingSample> samples, std::span<const double> w);
std::size_t satisfied_margins(std::span<const TrainingSample> samples, std::span<const double> w,
                              double tolerance = 1e-6);

}  // namespace hexpose
