#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hexpose/hierarchy.hpp"
#include "hexpose/point.hpp"

namespace hexpose {

struct Segment {
  std::string name;
  std::size_t a{0};  // atomic part indices
  std::size_t b{0};
};

/// {"segments": [{"name", "a", "b"}]} with endpoints given by atomic part name.
std::vector<Segment> segments_from_json(const nlohmann::json& doc, const PartHierarchy& h);

struct MetricItem {
  std::string name;
  std::size_t correct{0};
  std::size_t total{0};
  std::size_t skipped{0};
  double rate{0.0};
  friend bool operator==(const MetricItem&, const MetricItem&) = default;
};

struct MetricReport {
  std::string metric;
  std::vector<MetricItem> items;
  MetricItem aggregate;  // named "all"
  std::size_t samples{0};
  nlohmann::json parameters = nlohmann::json::object();
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// A segment is correct when both predicted endpoints lie within
/// fraction * |gt_a - gt_b| of their ground truth (inclusive). Zero-length
/// ground-truth segments are skipped. The aggregate rate is the mean over
/// segments that were evaluated at least once.
MetricReport pcp_segments(std::span<const Configuration> pred, std::span<const Configuration> gt,
                          std::span<const Segment> segments, double fraction = 0.5);

/// A part is correct when |pred - gt| <= factor * sigma (inclusive). Only
/// visible parts count; `visible` may be empty (all visible). The aggregate
/// is the total over all counted parts.
MetricReport pcp_radius(std::span<const Configuration> pred, std::span<const Configuration> gt,
                        std::span<const double> sigma, std::span<const std::string> part_names,
                        std::span<const std::vector<bool>> visible = {}, double factor = 1.5);

struct PdjPoint {
  double threshold{0.0};
  double rate{0.0};
};

/// Fraction of joints with |pred - gt| <= t * normalizer, per threshold.
std::vector<PdjPoint> pdj_curve(std::span<const Configuration> pred, std::span<const Configuration> gt,
                                std::span<const double> normalizer, std::span<const double> thresholds);

/// metric,item,correct,total,rate then one row per item and an "all" row.
std::string report_csv(const MetricReport& report);
nlohmann::json report_to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& doc);
/// threshold,rate rows.
std::string pdj_csv(std::span<const PdjPoint> curve);

}  // namespace hexpose
