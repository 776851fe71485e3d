#include "hexpose/synth.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "hexpose/error.hpp"
#include "hexpose/geometry.hpp"

namespace hexpose {
namespace {

double gaussian(double d2, double sigma) {
  const double z = d2 / (2.0 * sigma * sigma);
  return z > 8.0 ? 0.0 : std::exp(-z);  // cut at 4 sigma so far regions stay flat
}

Point2 rotate(const Point2& p, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

/// Full-length pose holding an exemplar's subtree atoms.
std::vector<Point2> scatter_atoms(const PartHierarchy& h, NodeIndex node, std::span<const Point2> atoms) {
  std::vector<Point2> pose(h.atomic_count());
  const auto idx = h.subtree_atoms(node);
  for (std::size_t k = 0; k < idx.size(); ++k) pose[idx[k]] = atoms[k];
  return pose;
}

void place(const PartHierarchy& h, const ExemplarLibrary& lib, Rng& rng, bool mix, NodeIndex node,
           std::size_t exemplar, const SimilarityTransform& t, GeneratedPose& out) {
  const PartNode& n = h.node(node);
  const Exemplar& e = lib.exemplars(h, node)[exemplar];
  out.exemplars[h.composite_slot(node)] = exemplar;
  const auto subtree = h.subtree_composites(node);
  std::size_t at = 0;
  for (NodeIndex c : n.children) {
    if (h.node(c).is_atomic()) {
      out.pose[c] = t(e.geometry.points[at]);
      ++at;
      continue;
    }
    const Point2 targets[3] = {t(e.geometry.points[at]), t(e.geometry.points[at + 1]), t(e.geometry.points[at + 2])};
    at += 3;
    const auto options = lib.exemplars(h, c);
    std::size_t pick = 0;
    if (mix) {
      pick = uniform_index(rng, options.size());
    } else {
      for (std::size_t k = 0; k < subtree.size(); ++k)
        if (subtree[k] == c) pick = e.subtree_poses[k];
    }
    const Exemplar& ec = options[pick];
    const std::vector<Point2> local = scatter_atoms(h, c, ec.atoms);
    const BoundingBox box = tight_box(local, h, c);
    const Point2 source[3] = {anchor_point(local, h, c), box.top_left, box.bottom_right};
    const ConstrainedFit fit = fit_constrained(source, targets, AngleBound{kPi});
    place(h, lib, rng, mix, c, pick, fit.transform, out);
  }
}

}  // namespace

std::vector<Annotation> random_annotations(const PartHierarchy& h, std::size_t count, std::uint64_t seed,
                                           const LayoutOptions& o) {
  std::vector<Annotation> out;
  for (std::size_t r = 0; r < count; ++r) {
    Rng rng = make_stream(seed, {0x4c41, r});
    std::vector<Point2> center(h.node_count());
    center[h.root()] = {0.0, 0.0};
    // Parents before children: canonical order is by level, so walk it backwards.
    for (NodeIndex node = h.node_count(); node-- > 0;) {
      const PartNode& n = h.node(node);
      if (n.is_atomic()) continue;
      const double radius = std::pow(2.4, n.level - 2);
      const double offset = 0.7 * static_cast<double>(node);
      const std::size_t m = n.children.size();
      for (std::size_t k = 0; k < m; ++k) {
        const double angle = offset + 2.0 * kPi * static_cast<double>(k) / static_cast<double>(m) +
                             o.angle_jitter * standard_normal(rng);
        const double len = radius * (1.0 + uniform_real(rng, -o.radius_jitter, o.radius_jitter));
        center[n.children[k]] = center[node] + len * Point2{std::cos(angle), std::sin(angle)};
      }
    }
    std::vector<Point2> pose(center.begin(), center.begin() + static_cast<std::ptrdiff_t>(h.atomic_count()));
    const double rotation = uniform_real(rng, -o.rotation_range, o.rotation_range);
    for (Point2& p : pose) p = rotate(p, rotation);
    const double size = object_size(pose);
    const BoundingBox box = bounding_box(pose);
    const Point2 mid = 0.5 * (box.top_left + box.bottom_right);
    const Point2 image_mid{0.5 * o.image_width, 0.5 * o.image_height};
    for (Point2& p : pose) p = image_mid + (o.object_size / size) * (p - mid);
    Annotation a;
    a.image = "layout_" + std::to_string(seed) + "_" + std::to_string(r);
    a.width = o.image_width;
    a.height = o.image_height;
    a.pose = Configuration(std::move(pose));
    out.push_back(std::move(a));
  }
  return out;
}

GeneratedPose generate_pose(const PartHierarchy& h, const ExemplarLibrary& library, Rng& rng, bool mix,
                            const PlacementOptions& placement) {
  for (std::size_t s = 0; s < h.composite_count(); ++s)
    if (library.slot(s).empty())
      throw std::invalid_argument("generate_pose: no exemplars for part \"" + h.node(h.composite_node(s)).name + "\"");
  const auto roots = library.exemplars(h, h.root());
  const std::size_t pick = uniform_index(rng, roots.size());
  const Exemplar& e = roots[pick];
  const BoundingBox box = bounding_box(e.atoms);
  const Point2 mid = 0.5 * (box.top_left + box.bottom_right);
  SimilarityTransform t;
  t.scale = placement.object_size / e.object_size;
  t.angle = uniform_real(rng, -placement.rotation_range, placement.rotation_range);
  const Point2 center = placement.center + Point2{uniform_real(rng, -placement.shift, placement.shift),
                                                  uniform_real(rng, -placement.shift, placement.shift)};
  t.translation = center - t.scale * rotate(mid, t.angle);
  GeneratedPose out;
  out.pose = Configuration(h.atomic_count());
  out.exemplars.assign(h.composite_count(), 0);
  place(h, library, rng, mix, h.root(), pick, t, out);
  return out;
}

ScoreMapStack render_score_maps(const PartHierarchy& h, const RelationTypeModel& types, const Configuration& x,
                                const RenderOptions& o, Rng& rng) {
  for (const Point2& p : x.points)
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x <= o.width - 1.0 && p.y <= o.height - 1.0))
      throw std::invalid_argument("render_score_maps: configuration leaves the grid");
  const TypeLabels labels = label_configuration(h, types, x.span());
  const double size = object_size(x.span());
  const std::size_t hw = static_cast<std::size_t>(o.width) * o.height;

  AtomicLayer layer;
  layer.scale = scale_for_size(size, 1, h.scale());
  layer.height = o.height;
  layer.width = o.width;
  layer.channels.push_back({0, 0});
  for (std::size_t i = 0; i < h.atomic_count(); ++i)
    for (std::uint32_t t = 1; t <= types.atomic[i].bins; ++t)
      layer.channels.push_back({static_cast<std::uint32_t>(h.node(i).id), t});
  std::vector<double> raw(layer.channels.size() * hw, o.base);
  for (std::size_t p = 0; p < hw; ++p) raw[p] = 1.0;

  struct Bump {
    std::size_t channel;
    Point2 at;
    double height;
  };
  std::vector<Bump> bumps;
  std::size_t first = 1;
  for (std::size_t i = 0; i < h.atomic_count(); ++i) {
    const std::uint32_t bins = types.atomic[i].bins;
    bumps.push_back({first + labels.atomic[i] - 1, x[i], o.amplitude});
    for (std::size_t d = 0; d < o.distractors; ++d) {
      const Point2 at{uniform_real(rng, 0.0, o.width - 1.0), uniform_real(rng, 0.0, o.height - 1.0)};
      bumps.push_back({first + uniform_index(rng, bins), at, o.amplitude * o.distractor_amplitude});
    }
    first += bins;
  }
  const long reach = static_cast<long>(std::ceil(4.0 * o.sigma)) + 1;
  for (const Bump& b : bumps) {
    const long r0 = std::max(0L, static_cast<long>(std::floor(b.at.y)) - reach);
    const long r1 = std::min(static_cast<long>(o.height) - 1, static_cast<long>(std::ceil(b.at.y)) + reach);
    const long c0 = std::max(0L, static_cast<long>(std::floor(b.at.x)) - reach);
    const long c1 = std::min(static_cast<long>(o.width) - 1, static_cast<long>(std::ceil(b.at.x)) + reach);
    for (long r = r0; r <= r1; ++r)
      for (long c = c0; c <= c1; ++c) {
        const double g = gaussian(squared_distance({static_cast<double>(c), static_cast<double>(r)}, b.at), o.sigma);
        raw[b.channel * hw + static_cast<std::size_t>(r) * o.width + static_cast<std::size_t>(c)] += b.height * g;
      }
  }
  if (o.noise > 0.0)
    for (std::size_t k = hw; k < raw.size(); ++k) raw[k] += uniform_real(rng, 0.0, o.noise);
  layer.data.resize(raw.size());
  for (std::size_t p = 0; p < hw; ++p) {
    double total = 0.0;
    for (std::size_t ch = 0; ch < layer.channels.size(); ++ch) total += raw[ch * hw + p];
    for (std::size_t ch = 0; ch < layer.channels.size(); ++ch)
      layer.data[ch * hw + p] = static_cast<float>(raw[ch * hw + p] / total);
  }

  std::vector<CompositeLayer> composite;
  for (std::size_t s = 0; s < h.composite_count(); ++s) {
    const auto& model = types.composite[s];
    if (!model) continue;
    const NodeIndex node = h.composite_node(s);
    CompositeLayer cl;
    cl.level = static_cast<std::uint32_t>(h.node(node).level);
    cl.part = static_cast<std::uint32_t>(h.node(node).id);
    cl.scale = scale_for_size(size, h.node(node).level, h.scale());
    cl.height = o.height;
    cl.width = o.width;
    cl.types = static_cast<std::uint32_t>(model->centroids.size());
    cl.data.resize(static_cast<std::size_t>(cl.types) * hw);
    const Point2 anchor = anchor_point(x.span(), h, node);
    const std::uint32_t truth = labels.composite[s];
    for (std::size_t r = 0; r < o.height; ++r)
      for (std::size_t c = 0; c < o.width; ++c) {
        const double g = o.composite_amplitude *
                         gaussian(squared_distance({static_cast<double>(c), static_cast<double>(r)}, anchor),
                                  o.composite_sigma);
        for (std::uint32_t t = 1; t <= cl.types; ++t) {
          const double p = (1.0 - g) / cl.types + (t == truth ? g : 0.0);
          cl.data[((t - 1) * o.height + r) * o.width + c] = static_cast<float>(p);
        }
      }
    composite.push_back(std::move(cl));
  }
  std::vector<AtomicLayer> atomic;
  atomic.push_back(std::move(layer));
  return ScoreMapStack(std::move(atomic), std::move(composite));
}

SynthScene make_scene(const PartHierarchy& h, const ExemplarLibrary& library, const SceneOptions& options,
                      std::uint64_t seed) {
  Rng pose_rng = make_stream(seed, {0x504f});
  Rng map_rng = make_stream(seed, {0x4d41});
  const GeneratedPose g = generate_pose(h, library, pose_rng, options.mix, options.placement);
  Annotation truth;
  truth.image = "scene_" + std::to_string(seed);
  truth.width = options.render.width;
  truth.height = options.render.height;
  truth.pose = g.pose;
  for (Point2& p : truth.pose.points) p = {std::floor(p.x + 0.5), std::floor(p.y + 0.5)};
  ScoreMapStack maps = render_score_maps(h, library.types(), truth.pose, options.render, map_rng);

  nlohmann::json exemplars = nlohmann::json::object();
  for (std::size_t s = 0; s < h.composite_count(); ++s) {
    const NodeIndex node = h.composite_node(s);
    exemplars[h.node(node).name] = {{"index", g.exemplars[s]},
                                    {"source", library.slot(s)[g.exemplars[s]].source}};
  }
  const RenderOptions& r = options.render;
  nlohmann::json provenance = {
      {"seed", seed},
      {"mix", options.mix},
      {"exemplars", exemplars},
      {"placement",
       {{"center", {options.placement.center.x, options.placement.center.y}},
        {"shift", options.placement.shift},
        {"object_size", options.placement.object_size},
        {"rotation_range", options.placement.rotation_range}}},
      {"render",
       {{"width", r.width}, {"height", r.height}, {"sigma", r.sigma}, {"amplitude", r.amplitude}, {"base", r.base},
        {"distractors", r.distractors}, {"distractor_amplitude", r.distractor_amplitude}, {"noise", r.noise},
        {"composite_amplitude", r.composite_amplitude}, {"composite_sigma", r.composite_sigma}}}};
  return SynthScene{seed, std::move(truth), std::move(maps), std::move(provenance)};
}

void write_scene_bundle(const std::filesystem::path& dir, const SynthScene& scene, const PartHierarchy& h) {
  std::filesystem::create_directories(dir);
  const std::string stem = "scene_" + std::to_string(scene.seed);
  save_annotations(dir / (stem + ".json"), std::span<const Annotation>(&scene.truth, 1), h);
  scene.maps.save(dir / (stem + ".hpsm"));
  write_json_file(dir / (stem + ".provenance.json"), scene.provenance);
}

double oracle_psi(std::span<const Point2> current, std::span<const Point2> exemplar, double max_abs_angle,
                  const OracleLattice& lattice) {
  if (current.size() != exemplar.size()) throw std::invalid_argument("oracle_psi: point counts differ");
  const std::size_t n = current.size();
  Point2 mc;
  Point2 me;
  for (std::size_t k = 0; k < n; ++k) {
    mc += current[k];
    me += exemplar[k];
  }
  mc = (1.0 / static_cast<double>(n)) * mc;
  me = (1.0 / static_cast<double>(n)) * me;
  // Residual after the best translation for a given scale and angle.
  auto residual = [&](double s, double a) {
    const double c = std::cos(a);
    const double sn = std::sin(a);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Point2 q = exemplar[k] - me;
      const Point2 moved{s * (c * q.x - sn * q.y), s * (sn * q.x + c * q.y)};
      total += squared_distance(moved, current[k] - mc);
    }
    return total;
  };
  double best_s = lattice.scale_min;
  double best_a = -max_abs_angle;
  double best = std::numeric_limits<double>::infinity();
  const auto scale_steps = static_cast<long>(std::floor((lattice.scale_max - lattice.scale_min) / lattice.scale_step + 1e-9));
  const auto angle_steps = static_cast<long>(std::floor(2.0 * max_abs_angle / lattice.angle_step + 1e-9));
  for (long i = 0; i <= scale_steps; ++i) {
    const double s = lattice.scale_min + static_cast<double>(i) * lattice.scale_step;
    for (long j = 0; j <= angle_steps + 1; ++j) {
      const double a = std::min(max_abs_angle, -max_abs_angle + static_cast<double>(j) * lattice.angle_step);
      const double v = residual(s, a);
      if (v < best) {
        best = v;
        best_s = s;
        best_a = a;
      }
    }
  }
  double ds = lattice.scale_step;
  double da = lattice.angle_step;
  while (ds > 1e-14 || da > 1e-14) {
    bool improved = false;
    const double moves[4][2] = {{ds, 0.0}, {-ds, 0.0}, {0.0, da}, {0.0, -da}};
    for (const auto& mv : moves) {
      const double s = std::max(1e-9, best_s + mv[0]);
      const double a = std::clamp(best_a + mv[1], -max_abs_angle, max_abs_angle);
      const double v = residual(s, a);
      if (v < best) {
        best = v;
        best_s = s;
        best_a = a;
        improved = true;
      }
    }
    if (!improved) {
      ds *= 0.5;
      da *= 0.5;
    }
  }
  return -best;
}

OracleOptimum oracle_best_config(const ScoringModel& m, const WeightVector& w,
                                 std::span<const std::vector<Point2>> candidates, std::size_t budget) {
  const std::size_t n = m.hierarchy.atomic_count();
  if (candidates.size() != n) throw std::invalid_argument("oracle_best_config: one candidate list per part required");
  std::size_t total = 1;
  for (const auto& c : candidates) {
    if (c.empty()) throw std::invalid_argument("oracle_best_config: empty candidate list");
    if (total > budget / c.size()) throw std::invalid_argument("oracle_best_config: configuration budget exceeded");
    total *= c.size();
  }
  auto lex_less = [](const Configuration& a, const Configuration& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].x != b[i].x) return a[i].x < b[i].x;
      if (a[i].y != b[i].y) return a[i].y < b[i].y;
    }
    return false;
  };
  std::vector<std::size_t> digit(n, 0);
  Configuration x(n);
  OracleOptimum best;
  best.score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < total; ++k) {
    for (std::size_t i = 0; i < n; ++i) x[i] = candidates[i][digit[i]];
    const double s = total_score(m, x.span(), w);
    if (s > best.score || (s == best.score && lex_less(x, best.pose))) {
      best.score = s;
      best.pose = x;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (++digit[i] < candidates[i].size()) break;
      digit[i] = 0;
    }
  }
  best.evaluated = total;
  return best;
}

}  // namespace hexpose
