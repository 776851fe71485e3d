#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "hexpose/hierarchy.hpp"
#include "hexpose/point.hpp"
#include "hexpose/random.hpp"

namespace hexpose {

/// Probabilities are clamped to this value before taking logs.
inline constexpr double kProbabilityFloor = 1e-6;

/// One channel of the atomic tensor. Part 0 with type 0 is background;
/// other parts are hierarchy node ids with types 1..T.
struct ChannelKey {
  std::uint32_t part{0};
  std::uint32_t type{0};
  friend bool operator==(const ChannelKey&, const ChannelKey&) = default;
};

/// p(i, m | location) at one detection scale, row-major [channel][row][col].
struct AtomicLayer {
  double scale{1.0};
  std::uint32_t height{0};
  std::uint32_t width{0};
  std::vector<ChannelKey> channels;
  std::vector<float> data;

  float at(std::size_t channel, std::size_t row, std::size_t col) const {
    return data[(channel * height + row) * width + col];
  }
};

/// p(m | composite part, location) at one scale, row-major [type][row][col].
struct CompositeLayer {
  std::uint32_t level{2};
  std::uint32_t part{0};  // hierarchy node id
  double scale{1.0};
  std::uint32_t height{0};
  std::uint32_t width{0};
  std::uint32_t types{0};
  std::vector<float> data;

  float at(std::size_t type_index, std::size_t row, std::size_t col) const {
    return data[(type_index * height + row) * width + col];
  }
};

/// Multi-scale score maps standing in for the part classifiers. Immutable
/// once constructed; lookups use the nearest pixel at the nearest scale.
class ScoreMapStack {
 public:
  /// Validates normalization (1e-3) and value ranges. Throws FormatError.
  ScoreMapStack(std::vector<AtomicLayer> atomic, std::vector<CompositeLayer> composite);

  static ScoreMapStack read(std::istream& in);
  static ScoreMapStack load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  std::span<const AtomicLayer> atomic_layers() const { return atomic_; }
  std::span<const CompositeLayer> composite_layers() const { return composite_; }

  /// Index of the atomic layer whose scale is nearest to s (log distance, ties to the first).
  std::size_t snap_atomic(double s) const;
  /// Composite layer of `part` nearest to s, if the part has any.
  std::optional<std::size_t> snap_composite(std::uint32_t part, double s) const;

  /// Marginal p(i | pixel); 0 outside the grid or for unknown parts.
  double marginal(std::size_t layer, std::uint32_t part, long row, long col) const;
  /// p(i, m | pixel); 0 outside the grid or for unknown channels.
  double joint(std::size_t layer, std::uint32_t part, std::uint32_t type, long row, long col) const;
  /// p(m | i, pixel) from a composite layer; 0 outside the grid.
  double conditional(std::size_t composite_layer, std::uint32_t type, long row, long col) const;
  /// Number of relation types the atomic tensor holds for a part.
  std::uint32_t atomic_types(std::uint32_t part) const;

 private:
  struct PartChannels {
    std::uint32_t part{0};
    std::vector<std::size_t> by_type;  // channel index for type t at [t - 1]
    std::vector<double> marginal;      // [row][col]
  };
  struct LayerIndex {
    std::vector<PartChannels> parts;  // sorted by part id
  };
  const PartChannels* find_part(std::size_t layer, std::uint32_t part) const;

  std::vector<AtomicLayer> atomic_;
  std::vector<CompositeLayer> composite_;
  std::vector<LayerIndex> index_;
};

/// Nearest pixel (row, col) for a continuous location.
std::pair<long, long> pixel_of(const Point2& x);

/// log p(i | x, s), the per-type probabilities summed out; floored.
double phi_atomic(const ScoreMapStack& stack, std::uint32_t part, const Point2& x, double s);

/// A relation-type label evaluated at a location.
struct TypedLocation {
  std::uint32_t part{0};
  std::uint32_t type{0};
  Point2 location;
};

/// Sum over children of log p(m | i, x_i, s) = log[p(i, m | x_i) / p(i | x_i)].
double phi_pose_level2(const ScoreMapStack& stack, std::span<const TypedLocation> children, double s);
/// Sum over composite children of log p(m | i, anchor_i, s) from the composite layers.
double phi_pose_upper(const ScoreMapStack& stack, std::span<const TypedLocation> children, double s);

struct Peak {
  Point2 location;
  double score{0.0};
};

/// Strict 8-neighbourhood maxima of p(i | ·), greedily kept in descending
/// score (ties row-major) while staying at least nms_radius apart.
std::vector<Peak> top_peaks(const ScoreMapStack& stack, std::uint32_t part, double s, std::size_t max_peaks,
                            double nms_radius);

/// Uniform orientation bin of an offset, 1..bins; angle 0 is type 1.
/// Throws DegenerateInput for a zero offset.
std::uint32_t orientation_bin(const Point2& offset, std::uint32_t bins);

/// Seeded k-means++ then Lloyd iterations (at most 100).
/// Throws DegenerateInput when there are fewer vectors than clusters.
std::vector<Relation4> fit_relation_clusters(std::span<const Relation4> vectors, std::size_t clusters,
                                             std::uint64_t seed);
/// Nearest centroid, 1-based; ties go to the lowest index.
std::uint32_t assign_relation_type(const Relation4& v, std::span<const Relation4> centroids);

}  // namespace hexpose
