#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hexpose/geometry.hpp"
#include "hexpose/hierarchy.hpp"

namespace hexpose {

/// Orientation bins of r_ij for an atomic part against its sibling neighbor.
struct AtomicRelationType {
  NodeIndex neighbor{kNoNode};
  std::uint32_t bins{12};
};

/// Clusters of size-normalized relation vectors for a composite part.
struct CompositeRelationType {
  NodeIndex neighbor{kNoNode};
  std::vector<Relation4> centroids;
};

struct RelationTypeModel {
  std::vector<AtomicRelationType> atomic;                       // per atomic part
  std::vector<std::optional<CompositeRelationType>> composite;  // per composite slot; the root has none
};

/// Relation-type label of every non-root part for one configuration.
struct TypeLabels {
  std::vector<std::uint32_t> atomic;     // per atomic part
  std::vector<std::uint32_t> composite;  // per composite slot; 0 for the root
};

/// Throws DegenerateInput when two sibling atoms coincide.
TypeLabels label_configuration(const PartHierarchy& h, const RelationTypeModel& types, std::span<const Point2> pose);

/// Fits centroids for every composite part below the root. Throws
/// DegenerateInput if there are fewer poses than composite_types.
RelationTypeModel fit_type_models(const PartHierarchy& h, std::span<const Configuration> poses,
                                  std::uint32_t atomic_bins = 12, std::size_t composite_types = 24,
                                  std::uint64_t seed = 0);

/// Children of `node` vectorized from a configuration (see ChildGeometry).
ChildGeometry child_geometry(const PartHierarchy& h, std::span<const Point2> pose, NodeIndex node);

/// One training pose of one composite part.
struct Exemplar {
  std::string source;  // image id of the annotation it came from
  double object_size{0.0};
  ChildGeometry geometry;
  std::vector<std::uint32_t> child_types;  // label of each child, in child order
  std::vector<Point2> atoms;               // in subtree_atoms(node) order
  std::vector<std::uint32_t> subtree_poses;  // exemplar index per subtree_composites(node)
};

/// Exemplars per composite part plus the relation-type model used to label them.
class ExemplarLibrary {
 public:
  ExemplarLibrary() = default;
  /// Validates signatures and label ranges against the hierarchy.
  ExemplarLibrary(const PartHierarchy& h, RelationTypeModel types, std::vector<std::vector<Exemplar>> per_slot);

  const RelationTypeModel& types() const { return types_; }
  std::span<const Exemplar> exemplars(const PartHierarchy& h, NodeIndex node) const {
    return per_slot_.at(h.composite_slot(node));
  }
  std::span<const Exemplar> slot(std::size_t s) const { return per_slot_[s]; }
  std::size_t slot_count() const { return per_slot_.size(); }

  void write(std::ostream& out, const PartHierarchy& h) const;
  static ExemplarLibrary read(std::istream& in, const PartHierarchy& h);
  void save(const std::filesystem::path& path, const PartHierarchy& h) const;
  static ExemplarLibrary load(const std::filesystem::path& path, const PartHierarchy& h);

 private:
  RelationTypeModel types_;
  std::vector<std::vector<Exemplar>> per_slot_;
};

/// Root exemplars re-expressed for `original.collapsed()`.
ExemplarLibrary collapse_library(const PartHierarchy& original, const PartHierarchy& collapsed,
                                 const ExemplarLibrary& library);

}  // namespace hexpose
