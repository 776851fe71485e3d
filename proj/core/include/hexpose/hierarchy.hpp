#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hexpose/point.hpp"

namespace hexpose {

/// Position of a node in canonical order (by level, then document id).
/// Atomic parts come first, so an atomic node's index is its atomic part index.
using NodeIndex = std::size_t;
inline constexpr NodeIndex kNoNode = static_cast<NodeIndex>(-1);

/// Anchor of a composite part as a convex combination of descendant atoms.
struct AnchorSpec {
  std::vector<std::pair<std::size_t, double>> weights;  // (atomic index, weight)
};

struct PartNode {
  int id{0};
  std::string name;
  int level{1};
  std::vector<NodeIndex> children;  // canonical order; empty iff atomic
  NodeIndex parent{kNoNode};
  NodeIndex neighbor{kNoNode};  // sibling that relation types are measured against
  AnchorSpec anchor;            // empty for atomic parts

  bool is_atomic() const { return level == 1; }
};

struct ScaleParams {
  double reference_length{1.0};
  std::vector<double> level_factors;  // index 0 is level 1
};

/// Tree of atomic and composite parts. Immutable after construction.
class PartHierarchy {
 public:
  /// Validates the document and canonicalizes node order. Throws FormatError.
  static PartHierarchy from_json(const nlohmann::json& doc);
  static PartHierarchy load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  int levels() const { return levels_; }
  std::size_t atomic_count() const { return atomic_count_; }
  std::size_t node_count() const { return nodes_.size(); }
  NodeIndex root() const { return nodes_.size() - 1; }
  const std::string& name() const { return name_; }

  const PartNode& node(NodeIndex i) const { return nodes_[i]; }
  std::span<const PartNode> nodes() const { return nodes_; }
  std::span<const NodeIndex> level_nodes(int level) const { return by_level_[level - 1]; }

  /// Composite nodes in canonical order; weight and library vectors use this order.
  std::span<const NodeIndex> composite_nodes() const { return composites_; }
  std::size_t composite_count() const { return composites_.size(); }
  std::size_t composite_slot(NodeIndex i) const { return i - atomic_count_; }
  NodeIndex composite_node(std::size_t slot) const { return atomic_count_ + slot; }

  /// Sorted atomic indices below (or equal to) a node.
  std::span<const std::size_t> subtree_atoms(NodeIndex i) const { return subtree_atoms_[i]; }
  /// Composite nodes of the subtree rooted at i, including i when composite.
  std::span<const NodeIndex> subtree_composites(NodeIndex i) const { return subtree_composites_[i]; }
  bool is_descendant(NodeIndex node, NodeIndex ancestor) const;

  std::optional<NodeIndex> find_id(int id) const;
  std::optional<NodeIndex> find_name(std::string_view name) const;
  const ScaleParams& scale() const { return scale_; }

  /// Depth-2 variant: the root keeps its id and anchor and adopts every
  /// atomic part as a direct child. Atomic neighbors are preserved.
  PartHierarchy collapsed() const;

 private:
  void finalize();

  std::string name_;
  int levels_{0};
  std::size_t atomic_count_{0};
  std::vector<PartNode> nodes_;
  std::vector<std::vector<NodeIndex>> by_level_;
  std::vector<NodeIndex> composites_;
  std::vector<std::vector<std::size_t>> subtree_atoms_;
  std::vector<std::vector<NodeIndex>> subtree_composites_;
  ScaleParams scale_;
};

/// Componentwise min/max over the node's descendant atoms. Rejects atomic nodes.
BoundingBox tight_box(std::span<const Point2> pose, const PartHierarchy& h, NodeIndex node);
/// Weighted mean of the anchor's atoms. Rejects atomic nodes.
Point2 anchor_point(std::span<const Point2> pose, const PartHierarchy& h, NodeIndex node);

/// r_ij = x_j - x_i.
inline Point2 atomic_relation(const Point2& xi, const Point2& xj) { return xj - xi; }

using Relation4 = std::array<double, 4>;
/// [tl(b) - a, br(b) - a].
inline Relation4 composite_relation(const Point2& anchor, const BoundingBox& box) {
  const Point2 tl = box.top_left - anchor;
  const Point2 br = box.bottom_right - anchor;
  return {tl.x, tl.y, br.x, br.y};
}

/// Mean side length of the bounding box of all atoms.
double object_size(std::span<const Point2> pose);
/// level_factors[level] * size / reference_length.
double scale_for_size(double size, int level, const ScaleParams& params);
/// Throws DegenerateInput when the configuration has zero extent.
double scale_factor(std::span<const Point2> pose, int level, const ScaleParams& params);

}  // namespace hexpose
