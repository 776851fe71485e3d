#include "hexpose/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "hexpose/error.hpp"

namespace hexpose {
namespace {

using nlohmann::json;

struct RawNode {
  int id{0};
  std::string name;
  int level{0};
  std::vector<int> children;
  std::vector<std::pair<std::string, double>> anchor;
  std::optional<int> neighbor;
};

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw FormatError("unknown key \"" + key + "\" in " + std::string(where));
  }
}

template <typename T>
T required(const json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key)) throw FormatError("missing \"" + std::string(key) + "\" in " + std::string(where));
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError("bad \"" + std::string(key) + "\" in " + std::string(where) + ": " + e.what());
  }
}

RawNode parse_node(const json& j) {
  if (!j.is_object()) throw FormatError("hierarchy node must be an object");
  reject_unknown_keys(j, {"id", "name", "level", "children", "anchor", "neighbor"}, "hierarchy node");
  RawNode n;
  n.id = required<int>(j, "id", "hierarchy node");
  const std::string where = "node " + std::to_string(n.id);
  n.name = required<std::string>(j, "name", where);
  n.level = required<int>(j, "level", where);
  if (j.contains("children")) n.children = required<std::vector<int>>(j, "children", where);
  if (j.contains("anchor")) {
    if (!j.at("anchor").is_object()) throw FormatError("anchor of " + where + " must be an object");
    for (const auto& [key, value] : j.at("anchor").items()) {
      if (!value.is_number()) throw FormatError("anchor weight of " + where + " must be a number");
      n.anchor.emplace_back(key, value.get<double>());
    }
  }
  if (j.contains("neighbor")) n.neighbor = required<int>(j, "neighbor", where);
  return n;
}

}  // namespace

PartHierarchy PartHierarchy::from_json(const json& doc) {
  if (!doc.is_object()) throw FormatError("hierarchy document must be an object");
  reject_unknown_keys(doc, {"name", "levels", "nodes", "scale"}, "hierarchy document");

  const int levels = required<int>(doc, "levels", "hierarchy document");
  if (levels < 2) throw FormatError("hierarchy needs at least 2 levels");
  if (!doc.contains("nodes") || !doc.at("nodes").is_array())
    throw FormatError("hierarchy document needs a \"nodes\" array");

  std::vector<RawNode> raw;
  for (const json& jn : doc.at("nodes")) raw.push_back(parse_node(jn));
  if (raw.empty()) throw FormatError("hierarchy has no nodes");

  std::map<int, std::size_t> by_id;
  std::set<std::string> names;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const RawNode& n = raw[i];
    if (n.id <= 0) throw FormatError("node ids must be positive (got " + std::to_string(n.id) + ")");
    if (!by_id.emplace(n.id, i).second) throw FormatError("duplicate node id " + std::to_string(n.id));
    if (n.name.empty()) throw FormatError("node " + std::to_string(n.id) + " has an empty name");
    if (!names.insert(n.name).second) throw FormatError("duplicate node name \"" + n.name + "\"");
    if (n.level < 1 || n.level > levels)
      throw FormatError("node " + std::to_string(n.id) + " has level outside 1.." + std::to_string(levels));
  }
  for (const RawNode& n : raw) {
    for (int c : n.children) {
      if (!by_id.count(c))
        throw FormatError("node " + std::to_string(n.id) + " references unknown child " + std::to_string(c));
    }
  }

  // Cycle check runs before the level checks so a cyclic document reports the cycle.
  {
    std::vector<int> state(raw.size(), 0);
    auto visit = [&](auto&& self, std::size_t i) -> void {
      state[i] = 1;
      for (int c : raw[i].children) {
        const std::size_t ci = by_id.at(c);
        if (state[ci] == 1) throw FormatError("cycle detected at node " + std::to_string(raw[ci].id));
        if (state[ci] == 0) self(self, ci);
      }
      state[i] = 2;
    };
    for (std::size_t i = 0; i < raw.size(); ++i)
      if (state[i] == 0) visit(visit, i);
  }

  std::map<int, int> parent_of;
  for (const RawNode& n : raw) {
    if (n.level == 1 && !n.children.empty())
      throw FormatError("atomic node with children: " + std::to_string(n.id));
    if (n.level == 1 && !n.anchor.empty())
      throw FormatError("atomic node " + std::to_string(n.id) + " cannot have an anchor");
    for (int c : n.children) {
      const RawNode& child = raw[by_id.at(c)];
      if (child.level != n.level - 1)
        throw FormatError("level gap: node " + std::to_string(n.id) + " (level " + std::to_string(n.level) +
                          ") has child " + std::to_string(c) + " at level " + std::to_string(child.level));
      if (!parent_of.emplace(c, n.id).second)
        throw FormatError("node " + std::to_string(c) + " has more than one parent");
    }
    if (n.level > 1 && n.children.size() < 2)
      throw FormatError("composite node " + std::to_string(n.id) + " needs at least 2 children");
  }

  std::size_t roots = 0;
  for (const RawNode& n : raw) {
    if (n.level == levels) {
      ++roots;
      if (parent_of.count(n.id)) throw FormatError("root node " + std::to_string(n.id) + " has a parent");
    } else if (!parent_of.count(n.id)) {
      throw FormatError("node " + std::to_string(n.id) + " has no parent");
    }
  }
  if (roots != 1) throw FormatError("hierarchy must have exactly one node at level " + std::to_string(levels));

  // Canonical order: by level, then id.
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(raw[a].level, raw[a].id) < std::pair(raw[b].level, raw[b].id);
  });
  std::map<int, NodeIndex> index_of;
  for (NodeIndex i = 0; i < order.size(); ++i) index_of[raw[order[i]].id] = i;

  PartHierarchy h;
  h.name_ = doc.value("name", std::string{});
  h.levels_ = levels;
  h.nodes_.resize(raw.size());
  for (NodeIndex i = 0; i < order.size(); ++i) {
    const RawNode& r = raw[order[i]];
    PartNode& n = h.nodes_[i];
    n.id = r.id;
    n.name = r.name;
    n.level = r.level;
    for (int c : r.children) n.children.push_back(index_of.at(c));
    std::sort(n.children.begin(), n.children.end());
  }
  for (NodeIndex i = 0; i < h.nodes_.size(); ++i)
    for (NodeIndex c : h.nodes_[i].children) h.nodes_[c].parent = i;
  h.finalize();

  // Anchors, now that subtrees are known.
  for (NodeIndex i = 0; i < order.size(); ++i) {
    const RawNode& r = raw[order[i]];
    PartNode& n = h.nodes_[i];
    if (n.is_atomic()) continue;
    const auto atoms = h.subtree_atoms(i);
    if (r.anchor.empty()) {
      const double w = 1.0 / static_cast<double>(atoms.size());
      for (std::size_t a : atoms) n.anchor.weights.emplace_back(a, w);
      continue;
    }
    double sum = 0.0;
    for (const auto& [key, weight] : r.anchor) {
      std::optional<NodeIndex> ref;
      try {
        std::size_t pos = 0;
        const int id = std::stoi(key, &pos);
        if (pos == key.size()) ref = h.find_id(id);
      } catch (const std::exception&) {
      }
      if (!ref) ref = h.find_name(key);
      if (!ref) throw FormatError("anchor of node " + std::to_string(n.id) + " references unknown part \"" + key + "\"");
      if (!h.nodes_[*ref].is_atomic() || !std::binary_search(atoms.begin(), atoms.end(), *ref))
        throw FormatError("anchor of node " + std::to_string(n.id) + " references non-descendant part \"" + key + "\"");
      if (!(weight >= 0.0) || !std::isfinite(weight))
        throw FormatError("anchor weights of node " + std::to_string(n.id) + " must be non-negative");
      n.anchor.weights.emplace_back(*ref, weight);
      sum += weight;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw FormatError("anchor weights of node " + std::to_string(n.id) + " sum to " + std::to_string(sum));
    std::sort(n.anchor.weights.begin(), n.anchor.weights.end());
  }

  // Relation neighbors: an explicit sibling, or the next sibling in child order.
  for (NodeIndex i = 0; i < order.size(); ++i) {
    const RawNode& r = raw[order[i]];
    PartNode& n = h.nodes_[i];
    if (n.parent == kNoNode) {
      if (r.neighbor) throw FormatError("root node cannot have a relation neighbor");
      continue;
    }
    const auto& siblings = h.nodes_[n.parent].children;
    if (r.neighbor) {
      const auto ref = h.find_id(*r.neighbor);
      if (!ref || *ref == i || h.nodes_[*ref].parent != n.parent)
        throw FormatError("neighbor of node " + std::to_string(n.id) + " must be a sibling");
      n.neighbor = *ref;
    } else {
      const auto pos = static_cast<std::size_t>(std::find(siblings.begin(), siblings.end(), i) - siblings.begin());
      n.neighbor = siblings[(pos + 1) % siblings.size()];
    }
  }

  if (!doc.contains("scale")) throw FormatError("hierarchy document needs \"scale\"");
  const json& js = doc.at("scale");
  if (!js.is_object()) throw FormatError("\"scale\" must be an object");
  reject_unknown_keys(js, {"reference_length", "level_factors"}, "scale");
  h.scale_.reference_length = required<double>(js, "reference_length", "scale");
  h.scale_.level_factors = js.contains("level_factors")
                               ? required<std::vector<double>>(js, "level_factors", "scale")
                               : std::vector<double>(static_cast<std::size_t>(levels), 1.0);
  if (!(h.scale_.reference_length > 0)) throw FormatError("reference_length must be positive");
  if (h.scale_.level_factors.size() != static_cast<std::size_t>(levels))
    throw FormatError("level_factors needs one entry per level");
  for (double f : h.scale_.level_factors)
    if (!(f > 0)) throw FormatError("level_factors must be positive");
  return h;
}

void PartHierarchy::finalize() {
  by_level_.assign(static_cast<std::size_t>(levels_), {});
  composites_.clear();
  atomic_count_ = 0;
  for (NodeIndex i = 0; i < nodes_.size(); ++i) {
    by_level_[nodes_[i].level - 1].push_back(i);
    if (nodes_[i].is_atomic())
      ++atomic_count_;
    else
      composites_.push_back(i);
  }
  subtree_atoms_.assign(nodes_.size(), {});
  subtree_composites_.assign(nodes_.size(), {});
  // Children precede parents in canonical order.
  for (NodeIndex i = 0; i < nodes_.size(); ++i) {
    const PartNode& n = nodes_[i];
    if (n.is_atomic()) {
      subtree_atoms_[i] = {i};
      continue;
    }
    for (NodeIndex c : n.children) {
      subtree_atoms_[i].insert(subtree_atoms_[i].end(), subtree_atoms_[c].begin(), subtree_atoms_[c].end());
      subtree_composites_[i].insert(subtree_composites_[i].end(), subtree_composites_[c].begin(),
                                    subtree_composites_[c].end());
    }
    subtree_composites_[i].push_back(i);
    std::sort(subtree_atoms_[i].begin(), subtree_atoms_[i].end());
    std::sort(subtree_composites_[i].begin(), subtree_composites_[i].end());
  }
}

bool PartHierarchy::is_descendant(NodeIndex node, NodeIndex ancestor) const {
  for (NodeIndex n = node; n != kNoNode; n = nodes_[n].parent)
    if (n == ancestor) return true;
  return false;
}

std::optional<NodeIndex> PartHierarchy::find_id(int id) const {
  for (NodeIndex i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].id == id) return i;
  return std::nullopt;
}

std::optional<NodeIndex> PartHierarchy::find_name(std::string_view name) const {
  for (NodeIndex i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name == name) return i;
  return std::nullopt;
}

PartHierarchy PartHierarchy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open hierarchy file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FormatError("cannot parse hierarchy file " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

json PartHierarchy::to_json() const {
  json nodes = json::array();
  for (const PartNode& n : nodes_) {
    json jn{{"id", n.id}, {"name", n.name}, {"level", n.level}};
    if (!n.is_atomic()) {
      json children = json::array();
      for (NodeIndex c : n.children) children.push_back(nodes_[c].id);
      jn["children"] = children;
      json anchor = json::object();
      for (const auto& [a, w] : n.anchor.weights) anchor[std::to_string(nodes_[a].id)] = w;
      jn["anchor"] = anchor;
    }
    if (n.neighbor != kNoNode) jn["neighbor"] = nodes_[n.neighbor].id;
    nodes.push_back(jn);
  }
  return json{{"name", name_},
              {"levels", levels_},
              {"nodes", nodes},
              {"scale", {{"reference_length", scale_.reference_length}, {"level_factors", scale_.level_factors}}}};
}

PartHierarchy PartHierarchy::collapsed() const {
  PartHierarchy h;
  h.name_ = name_ + "-collapsed";
  h.levels_ = 2;
  h.nodes_.assign(nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(atomic_count_));
  PartNode root = nodes_[this->root()];
  root.level = 2;
  root.children.resize(atomic_count_);
  std::iota(root.children.begin(), root.children.end(), NodeIndex{0});
  h.nodes_.push_back(root);
  for (std::size_t i = 0; i < atomic_count_; ++i) h.nodes_[i].parent = atomic_count_;
  h.scale_ = {scale_.reference_length, {scale_.level_factors[0], scale_.level_factors[1]}};
  h.finalize();
  return h;
}

BoundingBox tight_box(std::span<const Point2> pose, const PartHierarchy& h, NodeIndex node) {
  if (h.node(node).is_atomic()) throw std::invalid_argument("tight_box requires a composite node");
  const auto atoms = h.subtree_atoms(node);
  BoundingBox b{pose[atoms.front()], pose[atoms.front()]};
  for (std::size_t a : atoms.subspan(1)) {
    const Point2& p = pose[a];
    b.top_left.x = std::min(b.top_left.x, p.x);
    b.top_left.y = std::min(b.top_left.y, p.y);
    b.bottom_right.x = std::max(b.bottom_right.x, p.x);
    b.bottom_right.y = std::max(b.bottom_right.y, p.y);
  }
  return b;
}

Point2 anchor_point(std::span<const Point2> pose, const PartHierarchy& h, NodeIndex node) {
  const PartNode& n = h.node(node);
  if (n.is_atomic()) throw std::invalid_argument("anchor_point requires a composite node");
  Point2 a;
  for (const auto& [atom, w] : n.anchor.weights) a += w * pose[atom];
  return a;
}

double object_size(std::span<const Point2> pose) { return bounding_box(pose).mean_side(); }

double scale_for_size(double size, int level, const ScaleParams& params) {
  return params.level_factors.at(static_cast<std::size_t>(level - 1)) * size / params.reference_length;
}

double scale_factor(std::span<const Point2> pose, int level, const ScaleParams& params) {
  if (level < 1 || static_cast<std::size_t>(level) > params.level_factors.size())
    throw std::invalid_argument("scale_factor: level out of range");
  const BoundingBox b = bounding_box(pose);
  if (b.width() <= 0 && b.height() <= 0) throw DegenerateInput("zero-extent configuration has no scale");
  return scale_for_size(b.mean_side(), level, params);
}

}  // namespace hexpose
