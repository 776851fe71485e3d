#pragma once

#include <filesystem>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hexpose/hierarchy.hpp"
#include "hexpose/point.hpp"
#include "hexpose/scoring.hpp"

namespace hexpose {

/// One annotated (or predicted) object in an image.
struct Annotation {
  std::string image;
  double width{0.0};
  double height{0.0};
  Configuration pose;
  std::vector<bool> visible;  // per atomic part; all true when absent from the file

  bool is_visible(std::size_t part) const { return visible.empty() || visible[part]; }
};

/// Array of {image, size:[W,H], parts:{name:[x,y]}, visible?:{name:bool}}.
std::vector<Annotation> annotations_from_json(const nlohmann::json& doc, const PartHierarchy& h);
nlohmann::json annotations_to_json(std::span<const Annotation> annotations, const PartHierarchy& h);
std::vector<Annotation> load_annotations(const std::filesystem::path& path, const PartHierarchy& h);
void save_annotations(const std::filesystem::path& path, std::span<const Annotation> annotations,
                      const PartHierarchy& h);

/// {bias, atomic:{name:w}, composite:{name:{alpha,beta}}}.
nlohmann::json weights_to_json(const WeightVector& w, const PartHierarchy& h);
WeightVector weights_from_json(const nlohmann::json& doc, const PartHierarchy& h);
WeightVector load_weights(const std::filesystem::path& path, const PartHierarchy& h);
void save_weights(const std::filesystem::path& path, const WeightVector& w, const PartHierarchy& h);

/// Parses a JSON file; throws FormatError naming the path.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes `doc` indented by two spaces with a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
void write_text_file(const std::filesystem::path& path, std::string_view text);

namespace json_util {

void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view where);

template <typename T>
T required(const nlohmann::json& obj, const char* key, std::string_view where);

template <typename T>
T optional(const nlohmann::json& obj, const char* key, T fallback, std::string_view where);

}  // namespace json_util
}  // namespace hexpose

#include "hexpose/detail/json_util.ipp"
