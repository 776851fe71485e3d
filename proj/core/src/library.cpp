#include "hexpose/library.hpp"

#include <algorithm>
#include <fstream>

#include "hexpose/appearance.hpp"
#include "hexpose/binary_io.hpp"
#include "hexpose/error.hpp"

namespace hexpose {
namespace {

constexpr std::string_view kMagic = "HPEL";
constexpr std::uint32_t kVersion = 1;

Relation4 normalized_relation(const PartHierarchy& h, std::span<const Point2> pose, NodeIndex node, double size) {
  const PartNode& n = h.node(node);
  Relation4 r = composite_relation(anchor_point(pose, h, node), tight_box(pose, h, n.neighbor));
  for (double& v : r) v /= size;
  return r;
}

NodeIndex node_by_id(const PartHierarchy& h, std::uint32_t id) {
  const auto n = h.find_id(static_cast<int>(id));
  if (!n) throw FormatError("library references unknown node id " + std::to_string(id));
  return *n;
}

}  // namespace

TypeLabels label_configuration(const PartHierarchy& h, const RelationTypeModel& types, std::span<const Point2> pose) {
  TypeLabels labels;
  labels.atomic.resize(h.atomic_count());
  for (std::size_t i = 0; i < h.atomic_count(); ++i) {
    const AtomicRelationType& t = types.atomic.at(i);
    const Point2 r = atomic_relation(pose[i], pose[t.neighbor]);
    if (r.x == 0.0 && r.y == 0.0)
      throw DegenerateInput("degenerate annotation: part \"" + h.node(i).name + "\" coincides with its neighbor");
    labels.atomic[i] = orientation_bin(r, t.bins);
  }
  labels.composite.assign(h.composite_count(), 0);
  const double size = object_size(pose);
  for (std::size_t s = 0; s < h.composite_count(); ++s) {
    const auto& t = types.composite.at(s);
    if (!t) continue;
    if (!(size > 0)) throw DegenerateInput("degenerate annotation: zero object size");
    labels.composite[s] = assign_relation_type(normalized_relation(h, pose, h.composite_node(s), size), t->centroids);
  }
  return labels;
}

RelationTypeModel fit_type_models(const PartHierarchy& h, std::span<const Configuration> poses,
                                  std::uint32_t atomic_bins, std::size_t composite_types, std::uint64_t seed) {
  RelationTypeModel m;
  for (std::size_t i = 0; i < h.atomic_count(); ++i) m.atomic.push_back({h.node(i).neighbor, atomic_bins});
  m.composite.resize(h.composite_count());
  for (std::size_t s = 0; s < h.composite_count(); ++s) {
    const NodeIndex node = h.composite_node(s);
    if (node == h.root()) continue;
    std::vector<Relation4> vectors;
    for (const Configuration& c : poses) {
      const double size = object_size(c.span());
      if (!(size > 0)) throw DegenerateInput("degenerate annotation: zero object size");
      vectors.push_back(normalized_relation(h, c.span(), node, size));
    }
    m.composite[s] = CompositeRelationType{h.node(node).neighbor,
                                           fit_relation_clusters(vectors, composite_types, seed + s)};
  }
  return m;
}

ChildGeometry child_geometry(const PartHierarchy& h, std::span<const Point2> pose, NodeIndex node) {
  ChildGeometry g;
  for (NodeIndex c : h.node(node).children) {
    if (h.node(c).is_atomic()) {
      g.points.push_back(pose[c]);
      g.kinds.push_back(ChildKind::Atomic);
    } else {
      const BoundingBox b = tight_box(pose, h, c);
      g.points.push_back(anchor_point(pose, h, c));
      g.points.push_back(b.top_left);
      g.points.push_back(b.bottom_right);
      g.kinds.push_back(ChildKind::Composite);
    }
  }
  return g;
}

ExemplarLibrary::ExemplarLibrary(const PartHierarchy& h, RelationTypeModel types,
                                 std::vector<std::vector<Exemplar>> per_slot)
    : types_(std::move(types)), per_slot_(std::move(per_slot)) {
  if (types_.atomic.size() != h.atomic_count()) throw FormatError("type model does not match hierarchy atoms");
  if (types_.composite.size() != h.composite_count())
    throw FormatError("type model does not match hierarchy composites");
  if (per_slot_.size() != h.composite_count()) throw FormatError("library does not cover every composite part");
  for (const AtomicRelationType& t : types_.atomic)
    if (t.bins < 2 || t.neighbor >= h.atomic_count()) throw FormatError("bad atomic relation type");
  for (const auto& t : types_.composite)
    if (t && t->centroids.empty()) throw FormatError("composite relation type without centroids");

  for (std::size_t s = 0; s < per_slot_.size(); ++s) {
    const NodeIndex node = h.composite_node(s);
    const PartNode& n = h.node(node);
    std::vector<ChildKind> kinds;
    std::size_t points = 0;
    for (NodeIndex c : n.children) {
      kinds.push_back(h.node(c).is_atomic() ? ChildKind::Atomic : ChildKind::Composite);
      points += h.node(c).is_atomic() ? 1 : 3;
    }
    const auto subtree = h.subtree_composites(node);
    for (const Exemplar& e : per_slot_[s]) {
      const std::string where = "exemplar of \"" + n.name + "\" from " + e.source;
      if (e.geometry.kinds != kinds || e.geometry.points.size() != points)
        throw FormatError(where + ": geometry signature does not match hierarchy");
      if (e.child_types.size() != n.children.size()) throw FormatError(where + ": wrong number of type labels");
      for (std::size_t k = 0; k < n.children.size(); ++k) {
        const NodeIndex c = n.children[k];
        const std::uint32_t limit = h.node(c).is_atomic()
                                        ? types_.atomic[c].bins
                                        : static_cast<std::uint32_t>(types_.composite[h.composite_slot(c)]
                                                                         ? types_.composite[h.composite_slot(c)]->centroids.size()
                                                                         : 0);
        if (e.child_types[k] < 1 || e.child_types[k] > limit) throw FormatError(where + ": type label out of range");
      }
      if (e.atoms.size() != h.subtree_atoms(node).size()) throw FormatError(where + ": wrong number of atoms");
      if (e.subtree_poses.size() != subtree.size()) throw FormatError(where + ": wrong number of subtree poses");
      if (!(e.object_size > 0)) throw FormatError(where + ": object size must be positive");
    }
  }
  for (std::size_t s = 0; s < per_slot_.size(); ++s) {
    const auto subtree = h.subtree_composites(h.composite_node(s));
    for (const Exemplar& e : per_slot_[s])
      for (std::size_t k = 0; k < subtree.size(); ++k)
        if (e.subtree_poses[k] >= per_slot_[h.composite_slot(subtree[k])].size())
          throw FormatError("exemplar subtree pose index out of range");
  }
}

void ExemplarLibrary::write(std::ostream& out, const PartHierarchy& h) const {
  using namespace binary;
  write_magic(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(types_.atomic.size()));
  for (std::size_t i = 0; i < types_.atomic.size(); ++i) {
    write_u32(out, static_cast<std::uint32_t>(h.node(i).id));
    write_u32(out, static_cast<std::uint32_t>(h.node(types_.atomic[i].neighbor).id));
    write_u32(out, types_.atomic[i].bins);
  }
  std::uint32_t n_comp = 0;
  for (const auto& t : types_.composite) n_comp += t ? 1 : 0;
  write_u32(out, n_comp);
  for (std::size_t s = 0; s < types_.composite.size(); ++s) {
    const auto& t = types_.composite[s];
    if (!t) continue;
    write_u32(out, static_cast<std::uint32_t>(h.node(h.composite_node(s)).id));
    write_u32(out, static_cast<std::uint32_t>(h.node(t->neighbor).id));
    write_u32(out, static_cast<std::uint32_t>(t->centroids.size()));
    for (const Relation4& c : t->centroids)
      for (double v : c) write_f64(out, v);
  }
  write_u32(out, static_cast<std::uint32_t>(per_slot_.size()));
  for (std::size_t s = 0; s < per_slot_.size(); ++s) {
    write_u32(out, static_cast<std::uint32_t>(h.node(h.composite_node(s)).id));
    write_u32(out, static_cast<std::uint32_t>(per_slot_[s].size()));
    for (const Exemplar& e : per_slot_[s]) {
      write_string(out, e.source);
      write_f64(out, e.object_size);
      write_u32(out, static_cast<std::uint32_t>(e.geometry.points.size()));
      for (const Point2& p : e.geometry.points) {
        write_f64(out, p.x);
        write_f64(out, p.y);
      }
      write_u32(out, static_cast<std::uint32_t>(e.child_types.size()));
      for (std::uint32_t t : e.child_types) write_u32(out, t);
      write_u32(out, static_cast<std::uint32_t>(e.atoms.size()));
      for (const Point2& p : e.atoms) {
        write_f64(out, p.x);
        write_f64(out, p.y);
      }
      write_u32(out, static_cast<std::uint32_t>(e.subtree_poses.size()));
      for (std::uint32_t p : e.subtree_poses) write_u32(out, p);
    }
  }
}

ExemplarLibrary ExemplarLibrary::read(std::istream& in, const PartHierarchy& h) {
  using namespace binary;
  expect_magic(in, kMagic);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) throw FormatError("unsupported library version " + std::to_string(version));
  auto bounded = [](std::uint32_t n, std::uint32_t limit, const char* what) {
    if (n > limit) throw FormatError(std::string("library: too many ") + what);
    return n;
  };

  RelationTypeModel types;
  const std::uint32_t n_atomic = read_u32(in);
  if (n_atomic != h.atomic_count()) throw FormatError("library atomic count does not match hierarchy");
  types.atomic.resize(n_atomic);
  for (std::uint32_t k = 0; k < n_atomic; ++k) {
    const NodeIndex node = node_by_id(h, read_u32(in));
    const NodeIndex neighbor = node_by_id(h, read_u32(in));
    if (!h.node(node).is_atomic()) throw FormatError("library atomic relation on a composite node");
    types.atomic[node] = {neighbor, read_u32(in)};
  }
  types.composite.resize(h.composite_count());
  const std::uint32_t n_comp = bounded(read_u32(in), static_cast<std::uint32_t>(h.composite_count()), "relation models");
  for (std::uint32_t k = 0; k < n_comp; ++k) {
    const NodeIndex node = node_by_id(h, read_u32(in));
    if (h.node(node).is_atomic()) throw FormatError("library composite relation on an atomic node");
    CompositeRelationType t;
    t.neighbor = node_by_id(h, read_u32(in));
    t.centroids.resize(bounded(read_u32(in), 1u << 16, "centroids"));
    for (Relation4& c : t.centroids)
      for (double& v : c) v = read_f64(in);
    types.composite[h.composite_slot(node)] = std::move(t);
  }

  std::vector<std::vector<Exemplar>> per_slot(h.composite_count());
  const std::uint32_t n_nodes = read_u32(in);
  if (n_nodes != h.composite_count()) throw FormatError("library node count does not match hierarchy");
  for (std::uint32_t k = 0; k < n_nodes; ++k) {
    const NodeIndex node = node_by_id(h, read_u32(in));
    if (h.node(node).is_atomic()) throw FormatError("library exemplars on an atomic node");
    auto& list = per_slot[h.composite_slot(node)];
    list.resize(bounded(read_u32(in), 1u << 24, "exemplars"));
    for (Exemplar& e : list) {
      e.source = read_string(in);
      e.object_size = read_f64(in);
      e.geometry.points.resize(bounded(read_u32(in), 1u << 16, "geometry points"));
      for (Point2& p : e.geometry.points) {
        p.x = read_f64(in);
        p.y = read_f64(in);
      }
      for (NodeIndex c : h.node(node).children)
        e.geometry.kinds.push_back(h.node(c).is_atomic() ? ChildKind::Atomic : ChildKind::Composite);
      e.child_types.resize(bounded(read_u32(in), 1u << 16, "type labels"));
      for (std::uint32_t& t : e.child_types) t = read_u32(in);
      e.atoms.resize(bounded(read_u32(in), 1u << 16, "atoms"));
      for (Point2& p : e.atoms) {
        p.x = read_f64(in);
        p.y = read_f64(in);
      }
      e.subtree_poses.resize(bounded(read_u32(in), 1u << 16, "subtree poses"));
      for (std::uint32_t& p : e.subtree_poses) p = read_u32(in);
    }
  }
  return ExemplarLibrary(h, std::move(types), std::move(per_slot));
}

void ExemplarLibrary::save(const std::filesystem::path& path, const PartHierarchy& h) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write library file " + path.string());
  write(out, h);
  if (!out) throw Error("failed writing library file " + path.string());
}

ExemplarLibrary ExemplarLibrary::load(const std::filesystem::path& path, const PartHierarchy& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open library file " + path.string());
  try {
    return read(in, h);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ExemplarLibrary collapse_library(const PartHierarchy& original, const PartHierarchy& collapsed,
                                 const ExemplarLibrary& library) {
  RelationTypeModel types;
  types.atomic = library.types().atomic;
  types.composite.resize(1);
  std::vector<std::vector<Exemplar>> per_slot(1);
  const auto roots = library.exemplars(original, original.root());
  for (std::size_t k = 0; k < roots.size(); ++k) {
    const Exemplar& src = roots[k];
    Exemplar e;
    e.source = src.source;
    e.object_size = src.object_size;
    e.atoms = src.atoms;  // the root subtree is every atom, in atomic order
    e.geometry.points = src.atoms;
    e.geometry.kinds.assign(src.atoms.size(), ChildKind::Atomic);
    for (std::size_t i = 0; i < src.atoms.size(); ++i) {
      const AtomicRelationType& t = types.atomic[i];
      e.child_types.push_back(orientation_bin(atomic_relation(src.atoms[i], src.atoms[t.neighbor]), t.bins));
    }
    e.subtree_poses = {static_cast<std::uint32_t>(k)};
    per_slot[0].push_back(std::move(e));
  }
  return ExemplarLibrary(collapsed, std::move(types), std::move(per_slot));
}

}  // namespace hexpose
