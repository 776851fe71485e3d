#include "hexpose/appearance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "hexpose/binary_io.hpp"
#include "hexpose/error.hpp"

namespace hexpose {
namespace {

constexpr std::string_view kMagic = "HPSM";
constexpr std::uint32_t kVersion = 1;
constexpr double kLoadTolerance = 1e-3;
constexpr std::uint32_t kMaxDimension = 1u << 15;

bool valid_probability(float v) { return std::isfinite(v) && v >= 0.0f && v <= 1.0f + 1e-6f; }

void check_dims(std::uint32_t h, std::uint32_t w, std::size_t channels, std::size_t data_size,
                const std::string& what) {
  if (h == 0 || w == 0 || h > kMaxDimension || w > kMaxDimension)
    throw FormatError(what + ": bad grid shape " + std::to_string(h) + "x" + std::to_string(w));
  if (channels == 0) throw FormatError(what + ": no channels");
  if (data_size != channels * h * w) throw FormatError(what + ": data size does not match shape");
}

// Per-pixel channel sums must be 1; reports the worst pixel.
template <typename Layer>
void check_normalized(const Layer& layer, std::size_t channels, const std::string& what) {
  double worst = 0.0;
  std::size_t worst_row = 0;
  std::size_t worst_col = 0;
  for (std::size_t r = 0; r < layer.height; ++r) {
    for (std::size_t c = 0; c < layer.width; ++c) {
      double sum = 0.0;
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const float v = layer.at(ch, r, c);
        if (!valid_probability(v))
          throw FormatError(what + ": value " + std::to_string(v) + " outside [0,1] at row " + std::to_string(r) +
                            ", col " + std::to_string(c));
        sum += v;
      }
      const double dev = std::abs(sum - 1.0);
      if (dev > worst) {
        worst = dev;
        worst_row = r;
        worst_col = c;
      }
    }
  }
  if (worst > kLoadTolerance) {
    std::ostringstream msg;
    msg << what << ": channel sums not normalized; worst deviation " << worst << " at row " << worst_row
        << ", col " << worst_col;
    throw FormatError(msg.str());
  }
}

std::size_t nearest_scale(std::span<const double> scales, double s) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  const double ls = std::log(std::max(s, std::numeric_limits<double>::min()));
  for (std::size_t i = 0; i < scales.size(); ++i) {
    const double d = std::abs(std::log(scales[i]) - ls);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

bool in_grid(long row, long col, std::uint32_t h, std::uint32_t w) {
  return row >= 0 && col >= 0 && row < static_cast<long>(h) && col < static_cast<long>(w);
}

double floored_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

}  // namespace

ScoreMapStack::ScoreMapStack(std::vector<AtomicLayer> atomic, std::vector<CompositeLayer> composite)
    : atomic_(std::move(atomic)), composite_(std::move(composite)) {
  if (atomic_.empty()) throw FormatError("score maps need at least one atomic scale");
  for (std::size_t li = 0; li < atomic_.size(); ++li) {
    const AtomicLayer& layer = atomic_[li];
    const std::string what = "atomic scale " + std::to_string(li);
    if (!(layer.scale > 0) || !std::isfinite(layer.scale)) throw FormatError(what + ": scale must be positive");
    check_dims(layer.height, layer.width, layer.channels.size(), layer.data.size(), what);

    std::map<std::uint32_t, std::map<std::uint32_t, std::size_t>> table;
    std::size_t background = 0;
    for (std::size_t ch = 0; ch < layer.channels.size(); ++ch) {
      const ChannelKey& k = layer.channels[ch];
      if (k.part == 0) {
        if (k.type != 0) throw FormatError(what + ": background channel must have type 0");
        ++background;
        continue;
      }
      if (k.type == 0) throw FormatError(what + ": part channels need types >= 1");
      if (!table[k.part].emplace(k.type, ch).second)
        throw FormatError(what + ": duplicate channel (" + std::to_string(k.part) + ", " + std::to_string(k.type) + ")");
    }
    if (background != 1) throw FormatError(what + ": expected exactly one background channel");
    check_normalized(layer, layer.channels.size(), what);

    LayerIndex index;
    const std::size_t pixels = static_cast<std::size_t>(layer.height) * layer.width;
    for (const auto& [part, types] : table) {
      PartChannels pc;
      pc.part = part;
      std::uint32_t expected = 1;
      for (const auto& [type, ch] : types) {
        if (type != expected++) throw FormatError(what + ": types of part " + std::to_string(part) + " must be 1..T");
        pc.by_type.push_back(ch);
      }
      pc.marginal.assign(pixels, 0.0);
      for (std::size_t ch : pc.by_type) {
        const float* plane = layer.data.data() + ch * pixels;
        for (std::size_t p = 0; p < pixels; ++p) pc.marginal[p] += plane[p];
      }
      index.parts.push_back(std::move(pc));
    }
    index_.push_back(std::move(index));
  }
  for (std::size_t li = 0; li < composite_.size(); ++li) {
    const CompositeLayer& layer = composite_[li];
    const std::string what = "composite layer " + std::to_string(li) + " (part " + std::to_string(layer.part) + ")";
    if (!(layer.scale > 0) || !std::isfinite(layer.scale)) throw FormatError(what + ": scale must be positive");
    if (layer.level < 2) throw FormatError(what + ": level must be at least 2");
    if (layer.part == 0) throw FormatError(what + ": part id must be positive");
    check_dims(layer.height, layer.width, layer.types, layer.data.size(), what);
    check_normalized(layer, layer.types, what);
  }
}

const ScoreMapStack::PartChannels* ScoreMapStack::find_part(std::size_t layer, std::uint32_t part) const {
  const auto& parts = index_[layer].parts;
  auto it = std::lower_bound(parts.begin(), parts.end(), part,
                             [](const PartChannels& pc, std::uint32_t p) { return pc.part < p; });
  return (it != parts.end() && it->part == part) ? &*it : nullptr;
}

std::size_t ScoreMapStack::snap_atomic(double s) const {
  std::vector<double> scales;
  scales.reserve(atomic_.size());
  for (const AtomicLayer& l : atomic_) scales.push_back(l.scale);
  return nearest_scale(scales, s);
}

std::optional<std::size_t> ScoreMapStack::snap_composite(std::uint32_t part, double s) const {
  std::vector<double> scales;
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < composite_.size(); ++i) {
    if (composite_[i].part != part) continue;
    scales.push_back(composite_[i].scale);
    ids.push_back(i);
  }
  if (ids.empty()) return std::nullopt;
  return ids[nearest_scale(scales, s)];
}

double ScoreMapStack::marginal(std::size_t layer, std::uint32_t part, long row, long col) const {
  const AtomicLayer& l = atomic_[layer];
  if (!in_grid(row, col, l.height, l.width)) return 0.0;
  const PartChannels* pc = find_part(layer, part);
  if (!pc) return 0.0;
  return pc->marginal[static_cast<std::size_t>(row) * l.width + static_cast<std::size_t>(col)];
}

double ScoreMapStack::joint(std::size_t layer, std::uint32_t part, std::uint32_t type, long row, long col) const {
  const AtomicLayer& l = atomic_[layer];
  if (!in_grid(row, col, l.height, l.width)) return 0.0;
  const PartChannels* pc = find_part(layer, part);
  if (!pc || type == 0 || type > pc->by_type.size()) return 0.0;
  return l.at(pc->by_type[type - 1], static_cast<std::size_t>(row), static_cast<std::size_t>(col));
}

double ScoreMapStack::conditional(std::size_t composite_layer, std::uint32_t type, long row, long col) const {
  const CompositeLayer& l = composite_[composite_layer];
  if (!in_grid(row, col, l.height, l.width) || type == 0 || type > l.types) return 0.0;
  return l.at(type - 1, static_cast<std::size_t>(row), static_cast<std::size_t>(col));
}

std::uint32_t ScoreMapStack::atomic_types(std::uint32_t part) const {
  const PartChannels* pc = find_part(0, part);
  return pc ? static_cast<std::uint32_t>(pc->by_type.size()) : 0;
}

void ScoreMapStack::write(std::ostream& out) const {
  using namespace binary;
  write_magic(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(atomic_.size()));
  for (const AtomicLayer& l : atomic_) {
    write_f64(out, l.scale);
    write_u32(out, l.height);
    write_u32(out, l.width);
    write_u32(out, static_cast<std::uint32_t>(l.channels.size()));
    for (const ChannelKey& k : l.channels) {
      write_u32(out, k.part);
      write_u32(out, k.type);
    }
    for (float v : l.data) write_f32(out, v);
  }
  write_u32(out, static_cast<std::uint32_t>(composite_.size()));
  for (const CompositeLayer& l : composite_) {
    write_u32(out, l.level);
    write_u32(out, l.part);
    write_f64(out, l.scale);
    write_u32(out, l.height);
    write_u32(out, l.width);
    write_u32(out, l.types);
    for (float v : l.data) write_f32(out, v);
  }
}

ScoreMapStack ScoreMapStack::read(std::istream& in) {
  using namespace binary;
  expect_magic(in, kMagic);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) throw FormatError("unsupported score-map version " + std::to_string(version));
  const std::uint32_t n_scales = read_u32(in);
  if (n_scales == 0 || n_scales > 1024) throw FormatError("bad number of scales");
  std::vector<AtomicLayer> atomic(n_scales);
  for (AtomicLayer& l : atomic) {
    l.scale = read_f64(in);
    l.height = read_u32(in);
    l.width = read_u32(in);
    const std::uint32_t n_channels = read_u32(in);
    if (l.height == 0 || l.width == 0 || l.height > kMaxDimension || l.width > kMaxDimension || n_channels == 0 ||
        n_channels > 1u << 16)
      throw FormatError("bad atomic layer shape");
    l.channels.resize(n_channels);
    for (ChannelKey& k : l.channels) {
      k.part = read_u32(in);
      k.type = read_u32(in);
    }
    l.data.resize(static_cast<std::size_t>(n_channels) * l.height * l.width);
    for (float& v : l.data) v = read_f32(in);
  }
  const std::uint32_t n_composite = read_u32(in);
  if (n_composite > 1u << 16) throw FormatError("bad number of composite layers");
  std::vector<CompositeLayer> composite(n_composite);
  for (CompositeLayer& l : composite) {
    l.level = read_u32(in);
    l.part = read_u32(in);
    l.scale = read_f64(in);
    l.height = read_u32(in);
    l.width = read_u32(in);
    l.types = read_u32(in);
    if (l.height == 0 || l.width == 0 || l.height > kMaxDimension || l.width > kMaxDimension || l.types == 0 ||
        l.types > 1u << 12)
      throw FormatError("bad composite layer shape");
    l.data.resize(static_cast<std::size_t>(l.types) * l.height * l.width);
    for (float& v : l.data) v = read_f32(in);
  }
  return ScoreMapStack(std::move(atomic), std::move(composite));
}

ScoreMapStack ScoreMapStack::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open score-map file " + path.string());
  try {
    return read(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void ScoreMapStack::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write score-map file " + path.string());
  write(out);
  if (!out) throw Error("failed writing score-map file " + path.string());
}

std::pair<long, long> pixel_of(const Point2& x) {
  return {static_cast<long>(std::floor(x.y + 0.5)), static_cast<long>(std::floor(x.x + 0.5))};
}

double phi_atomic(const ScoreMapStack& stack, std::uint32_t part, const Point2& x, double s) {
  const auto [row, col] = pixel_of(x);
  return floored_log(stack.marginal(stack.snap_atomic(s), part, row, col));
}

double phi_pose_level2(const ScoreMapStack& stack, std::span<const TypedLocation> children, double s) {
  const std::size_t layer = stack.snap_atomic(s);
  double total = 0.0;
  for (const TypedLocation& c : children) {
    const auto [row, col] = pixel_of(c.location);
    const double m = stack.marginal(layer, c.part, row, col);
    const double p = m > 0.0 ? stack.joint(layer, c.part, c.type, row, col) / m : 0.0;
    total += floored_log(p);
  }
  return total;
}

double phi_pose_upper(const ScoreMapStack& stack, std::span<const TypedLocation> children, double s) {
  double total = 0.0;
  for (const TypedLocation& c : children) {
    const auto layer = stack.snap_composite(c.part, s);
    double p = 0.0;
    if (layer) {
      const auto [row, col] = pixel_of(c.location);
      p = stack.conditional(*layer, c.type, row, col);
    }
    total += floored_log(p);
  }
  return total;
}

std::vector<Peak> top_peaks(const ScoreMapStack& stack, std::uint32_t part, double s, std::size_t max_peaks,
                            double nms_radius) {
  if (max_peaks == 0) throw std::invalid_argument("top_peaks: max_peaks must be at least 1");
  const std::size_t layer = stack.snap_atomic(s);
  const AtomicLayer& l = stack.atomic_layers()[layer];
  const long h = l.height;
  const long w = l.width;
  std::vector<Peak> candidates;
  for (long r = 0; r < h; ++r) {
    for (long c = 0; c < w; ++c) {
      const double v = stack.marginal(layer, part, r, c);
      bool strict = true;
      bool has_neighbor = false;
      for (long dr = -1; dr <= 1 && strict; ++dr) {
        for (long dc = -1; dc <= 1; ++dc) {
          if ((dr == 0 && dc == 0) || !in_grid(r + dr, c + dc, l.height, l.width)) continue;
          has_neighbor = true;
          if (stack.marginal(layer, part, r + dr, c + dc) >= v) {
            strict = false;
            break;
          }
        }
      }
      if (strict && has_neighbor) candidates.push_back({{static_cast<double>(c), static_cast<double>(r)}, v});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Peak& a, const Peak& b) { return a.score > b.score; });
  std::vector<Peak> kept;
  for (const Peak& p : candidates) {
    if (kept.size() >= max_peaks) break;
    const bool isolated = std::all_of(kept.begin(), kept.end(), [&](const Peak& k) {
      return distance(k.location, p.location) >= nms_radius;
    });
    if (isolated) kept.push_back(p);
  }
  return kept;
}

std::uint32_t orientation_bin(const Point2& offset, std::uint32_t bins) {
  if (bins == 0) throw std::invalid_argument("orientation_bin: bins must be positive");
  if (offset.x == 0.0 && offset.y == 0.0) throw DegenerateInput("orientation_bin: zero offset has no orientation");
  double angle = std::atan2(offset.y, offset.x);
  if (angle < 0.0) angle += 2.0 * kPi;
  const double width = 2.0 * kPi / static_cast<double>(bins);
  const auto bin = static_cast<std::uint32_t>(std::floor(angle / width));
  return std::min(bin, bins - 1) + 1;
}

namespace {

double squared_distance4(const Relation4& a, const Relation4& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < 4; ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return d;
}

}  // namespace

std::uint32_t assign_relation_type(const Relation4& v, std::span<const Relation4> centroids) {
  if (centroids.empty()) throw std::invalid_argument("assign_relation_type: no centroids");
  std::size_t best = 0;
  double best_d = squared_distance4(v, centroids[0]);
  for (std::size_t i = 1; i < centroids.size(); ++i) {
    const double d = squared_distance4(v, centroids[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return static_cast<std::uint32_t>(best + 1);
}

std::vector<Relation4> fit_relation_clusters(std::span<const Relation4> vectors, std::size_t clusters,
                                             std::uint64_t seed) {
  constexpr int kMaxIterations = 100;
  if (clusters == 0) throw std::invalid_argument("fit_relation_clusters: need at least one cluster");
  if (vectors.size() < clusters)
    throw DegenerateInput("fit_relation_clusters: " + std::to_string(vectors.size()) + " vectors for " +
                          std::to_string(clusters) + " clusters");
  Rng rng = make_stream(seed, {0x6b6d65616e73ULL});

  // k-means++ seeding.
  std::vector<Relation4> centroids;
  centroids.push_back(vectors[uniform_index(rng, vectors.size())]);
  std::vector<double> d2(vectors.size());
  while (centroids.size() < clusters) {
    double total = 0.0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Relation4& c : centroids) best = std::min(best, squared_distance4(vectors[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double u = uniform_real(rng, 0.0, total);
      for (pick = 0; pick + 1 < vectors.size(); ++pick) {
        if (u < d2[pick]) break;
        u -= d2[pick];
      }
      while (d2[pick] == 0.0 && pick > 0) --pick;
    } else {
      pick = uniform_index(rng, vectors.size());
    }
    centroids.push_back(vectors[pick]);
  }

  std::vector<std::uint32_t> assignment(vectors.size(), 0);
  for (int it = 0; it < kMaxIterations; ++it) {
    bool changed = it == 0;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      const std::uint32_t a = assign_relation_type(vectors[i], centroids);
      if (a != assignment[i]) {
        assignment[i] = a;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<Relation4> sums(clusters, Relation4{0, 0, 0, 0});
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      const std::size_t c = assignment[i] - 1;
      for (std::size_t k = 0; k < 4; ++k) sums[c][k] += vectors[i][k];
      ++counts[c];
    }
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] == 0) continue;
      for (std::size_t k = 0; k < 4; ++k) centroids[c][k] = sums[c][k] / static_cast<double>(counts[c]);
    }
  }
  return centroids;
}

}  // namespace hexpose
