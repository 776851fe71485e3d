#include "hexpose/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "hexpose/error.hpp"

namespace hexpose {

using nlohmann::json;
using json_util::required;

namespace json_util {

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) throw FormatError(std::string(where) + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw FormatError("unknown key \"" + key + "\" in " + std::string(where));
}

}  // namespace json_util

namespace {

std::size_t part_by_name(const PartHierarchy& h, const std::string& name, std::string_view where) {
  const auto n = h.find_name(name);
  if (!n || !h.node(*n).is_atomic())
    throw FormatError("unknown atomic part \"" + name + "\" in " + std::string(where));
  return *n;
}

NodeIndex composite_by_name(const PartHierarchy& h, const std::string& name) {
  const auto n = h.find_name(name);
  if (!n || h.node(*n).is_atomic()) throw FormatError("unknown composite part \"" + name + "\" in weights");
  return *n;
}

double non_negative(const json& v, std::string_view what) {
  if (!v.is_number()) throw FormatError(std::string(what) + " must be a number");
  const double x = v.get<double>();
  if (!(x >= 0.0) || !std::isfinite(x)) throw FormatError(std::string(what) + " must be finite and non-negative");
  return x;
}

}  // namespace

std::vector<Annotation> annotations_from_json(const json& doc, const PartHierarchy& h) {
  if (!doc.is_array()) throw FormatError("annotation document must be an array");
  std::vector<Annotation> out;
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const json& j = doc[r];
    const std::string where = "annotation " + std::to_string(r);
    json_util::reject_unknown_keys(j, {"image", "size", "parts", "visible"}, where);
    Annotation a;
    a.image = required<std::string>(j, "image", where);
    const auto size = required<std::vector<double>>(j, "size", where);
    if (size.size() != 2 || !(size[0] > 0) || !(size[1] > 0))
      throw FormatError(where + ": size must be [width, height] with positive entries");
    a.width = size[0];
    a.height = size[1];
    const json& parts = j.contains("parts") ? j.at("parts") : json();
    if (!parts.is_object()) throw FormatError(where + ": parts must be an object");
    a.pose = Configuration(h.atomic_count());
    std::vector<bool> seen(h.atomic_count(), false);
    for (const auto& [name, value] : parts.items()) {
      const std::size_t i = part_by_name(h, name, where);
      std::vector<double> xy;
      try {
        xy = value.get<std::vector<double>>();
      } catch (const json::exception&) {
        throw FormatError(where + ": part \"" + name + "\" must be [x, y]");
      }
      if (xy.size() != 2 || !std::isfinite(xy[0]) || !std::isfinite(xy[1]))
        throw FormatError(where + ": part \"" + name + "\" must be [x, y]");
      a.pose[i] = {xy[0], xy[1]};
      seen[i] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i]) throw FormatError(where + ": missing part \"" + h.node(i).name + "\"");
    if (j.contains("visible")) {
      const json& v = j.at("visible");
      if (!v.is_object()) throw FormatError(where + ": visible must be an object");
      a.visible.assign(h.atomic_count(), true);
      for (const auto& [name, flag] : v.items()) {
        if (!flag.is_boolean()) throw FormatError(where + ": visibility of \"" + name + "\" must be a boolean");
        a.visible[part_by_name(h, name, where)] = flag.get<bool>();
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

json annotations_to_json(std::span<const Annotation> annotations, const PartHierarchy& h) {
  json doc = json::array();
  for (const Annotation& a : annotations) {
    json parts = json::object();
    for (std::size_t i = 0; i < h.atomic_count(); ++i) parts[h.node(i).name] = {a.pose[i].x, a.pose[i].y};
    json j{{"image", a.image}, {"size", {a.width, a.height}}, {"parts", parts}};
    if (!a.visible.empty()) {
      json v = json::object();
      for (std::size_t i = 0; i < h.atomic_count(); ++i) v[h.node(i).name] = static_cast<bool>(a.visible[i]);
      j["visible"] = v;
    }
    doc.push_back(std::move(j));
  }
  return doc;
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path, const PartHierarchy& h) {
  try {
    return annotations_from_json(read_json_file(path), h);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_annotations(const std::filesystem::path& path, std::span<const Annotation> annotations,
                      const PartHierarchy& h) {
  write_json_file(path, annotations_to_json(annotations, h));
}

json weights_to_json(const WeightVector& w, const PartHierarchy& h) {
  json atomic = json::object();
  for (std::size_t i = 0; i < h.atomic_count(); ++i) atomic[h.node(i).name] = w.atomic[i];
  json composite = json::object();
  for (std::size_t s = 0; s < h.composite_count(); ++s)
    composite[h.node(h.composite_node(s)).name] = {{"alpha", w.alpha[s]}, {"beta", w.beta[s]}};
  return {{"bias", w.bias}, {"atomic", atomic}, {"composite", composite}};
}

WeightVector weights_from_json(const json& doc, const PartHierarchy& h) {
  json_util::reject_unknown_keys(doc, {"bias", "atomic", "composite"}, "weights");
  WeightVector w = WeightVector::zeros(h);
  w.bias = required<double>(doc, "bias", "weights");
  const json& atomic = doc.contains("atomic") ? doc.at("atomic") : json();
  const json& composite = doc.contains("composite") ? doc.at("composite") : json();
  if (!atomic.is_object() || !composite.is_object())
    throw FormatError("weights need \"atomic\" and \"composite\" objects");
  std::vector<bool> seen(h.node_count(), false);
  for (const auto& [name, value] : atomic.items()) {
    const std::size_t i = part_by_name(h, name, "weights");
    w.atomic[i] = non_negative(value, "weight of \"" + name + "\"");
    seen[i] = true;
  }
  for (const auto& [name, value] : composite.items()) {
    const NodeIndex n = composite_by_name(h, name);
    const std::string where = "weights of \"" + name + "\"";
    json_util::reject_unknown_keys(value, {"alpha", "beta"}, where);
    if (!value.contains("alpha") || !value.contains("beta")) throw FormatError(where + " need alpha and beta");
    w.alpha[h.composite_slot(n)] = non_negative(value.at("alpha"), where + " alpha");
    w.beta[h.composite_slot(n)] = non_negative(value.at("beta"), where + " beta");
    seen[n] = true;
  }
  for (std::size_t n = 0; n < h.node_count(); ++n)
    if (!seen[n]) throw FormatError("weights missing part \"" + h.node(n).name + "\"");
  return w;
}

WeightVector load_weights(const std::filesystem::path& path, const PartHierarchy& h) {
  try {
    return weights_from_json(read_json_file(path), h);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_weights(const std::filesystem::path& path, const WeightVector& w, const PartHierarchy& h) {
  write_json_file(path, weights_to_json(w, h));
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& doc) { write_text_file(path, doc.dump(2) + "\n"); }

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace hexpose
