#include "hexpose/eval.hpp"

#include <sstream>
#include <stdexcept>

#include "hexpose/error.hpp"
#include "hexpose/io.hpp"

namespace hexpose {
namespace {

using nlohmann::json;

double rate_of(std::size_t correct, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

void check_sizes(std::span<const Configuration> pred, std::span<const Configuration> gt) {
  if (pred.size() != gt.size()) throw std::invalid_argument("prediction and ground-truth counts differ");
  for (std::size_t k = 0; k < pred.size(); ++k)
    if (pred[k].size() != gt[k].size()) throw std::invalid_argument("prediction and ground truth part counts differ");
}

std::string number(double v) { return json(v).dump(); }

json item_json(const MetricItem& m) {
  return {{"name", m.name}, {"correct", m.correct}, {"total", m.total}, {"skipped", m.skipped}, {"rate", m.rate}};
}

MetricItem item_from(const json& j) {
  json_util::reject_unknown_keys(j, {"name", "correct", "total", "skipped", "rate"}, "report item");
  MetricItem m;
  m.name = json_util::required<std::string>(j, "name", "report item");
  m.correct = json_util::required<std::size_t>(j, "correct", "report item");
  m.total = json_util::required<std::size_t>(j, "total", "report item");
  m.skipped = json_util::required<std::size_t>(j, "skipped", "report item");
  m.rate = json_util::required<double>(j, "rate", "report item");
  return m;
}

}  // namespace

std::vector<Segment> segments_from_json(const json& doc, const PartHierarchy& h) {
  json_util::reject_unknown_keys(doc, {"segments"}, "segment spec");
  if (!doc.contains("segments") || !doc.at("segments").is_array())
    throw FormatError("segment spec needs a \"segments\" array");
  std::vector<Segment> out;
  for (const json& j : doc.at("segments")) {
    json_util::reject_unknown_keys(j, {"name", "a", "b"}, "segment");
    Segment s;
    s.name = json_util::required<std::string>(j, "name", "segment");
    auto part = [&](const char* key) {
      const auto name = json_util::required<std::string>(j, key, "segment " + s.name);
      const auto n = h.find_name(name);
      if (!n || !h.node(*n).is_atomic()) throw FormatError("segment " + s.name + ": unknown atomic part " + name);
      return *n;
    };
    s.a = part("a");
    s.b = part("b");
    if (s.a == s.b) throw FormatError("segment " + s.name + " joins a part to itself");
    out.push_back(std::move(s));
  }
  return out;
}

MetricReport pcp_segments(std::span<const Configuration> pred, std::span<const Configuration> gt,
                          std::span<const Segment> segments, double fraction) {
  check_sizes(pred, gt);
  MetricReport r;
  r.metric = "pcp_segments";
  r.samples = pred.size();
  r.parameters = {{"fraction", fraction}, {"inclusive", true}};
  double rate_sum = 0.0;
  std::size_t rated = 0;
  for (const Segment& s : segments) {
    MetricItem m;
    m.name = s.name;
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double length = distance(gt[k][s.a], gt[k][s.b]);
      if (!(length > 0.0)) {
        ++m.skipped;
        continue;
      }
      const double limit = fraction * length;
      ++m.total;
      if (distance(pred[k][s.a], gt[k][s.a]) <= limit && distance(pred[k][s.b], gt[k][s.b]) <= limit) ++m.correct;
    }
    m.rate = rate_of(m.correct, m.total);
    if (m.total > 0) {
      rate_sum += m.rate;
      ++rated;
    }
    r.aggregate.correct += m.correct;
    r.aggregate.total += m.total;
    r.aggregate.skipped += m.skipped;
    r.items.push_back(std::move(m));
  }
  r.aggregate.name = "all";
  r.aggregate.rate = rated == 0 ? 0.0 : rate_sum / static_cast<double>(rated);
  return r;
}

MetricReport pcp_radius(std::span<const Configuration> pred, std::span<const Configuration> gt,
                        std::span<const double> sigma, std::span<const std::string> part_names,
                        std::span<const std::vector<bool>> visible, double factor) {
  check_sizes(pred, gt);
  const std::size_t n = part_names.size();
  if (sigma.size() != n) throw std::invalid_argument("pcp_radius: missing sigma for some part");
  for (double s : sigma)
    if (!(s > 0.0)) throw std::invalid_argument("pcp_radius: sigma must be positive");
  if (!visible.empty() && visible.size() != pred.size())
    throw std::invalid_argument("pcp_radius: visibility count differs from sample count");
  MetricReport r;
  r.metric = "pcp_radius";
  r.samples = pred.size();
  r.parameters = {{"factor", factor}, {"inclusive", true}};
  for (std::size_t i = 0; i < n; ++i) {
    MetricItem m;
    m.name = part_names[i];
    for (std::size_t k = 0; k < pred.size(); ++k) {
      if (pred[k].size() != n) throw std::invalid_argument("pcp_radius: part count differs from names");
      if (!visible.empty() && !visible[k].empty() && !visible[k][i]) {
        ++m.skipped;
        continue;
      }
      ++m.total;
      if (distance(pred[k][i], gt[k][i]) <= factor * sigma[i]) ++m.correct;
    }
    m.rate = rate_of(m.correct, m.total);
    r.aggregate.correct += m.correct;
    r.aggregate.total += m.total;
    r.aggregate.skipped += m.skipped;
    r.items.push_back(std::move(m));
  }
  r.aggregate.name = "all";
  r.aggregate.rate = rate_of(r.aggregate.correct, r.aggregate.total);
  return r;
}

std::vector<PdjPoint> pdj_curve(std::span<const Configuration> pred, std::span<const Configuration> gt,
                                std::span<const double> normalizer, std::span<const double> thresholds) {
  check_sizes(pred, gt);
  if (normalizer.size() != pred.size()) throw std::invalid_argument("pdj_curve: one normalizer per sample required");
  for (double v : normalizer)
    if (!(v > 0.0)) throw std::invalid_argument("pdj_curve: normalizers must be positive");
  std::vector<double> errors;
  for (std::size_t k = 0; k < pred.size(); ++k)
    for (std::size_t i = 0; i < pred[k].size(); ++i) errors.push_back(distance(pred[k][i], gt[k][i]) / normalizer[k]);
  std::vector<PdjPoint> out;
  for (double t : thresholds) {
    std::size_t hit = 0;
    for (double e : errors) hit += e <= t ? 1 : 0;
    out.push_back({t, rate_of(hit, errors.size())});
  }
  return out;
}

std::string report_csv(const MetricReport& report) {
  std::ostringstream out;
  out << "metric,item,correct,total,rate\n";
  if (report.items.empty()) return out.str();
  for (const MetricItem& m : report.items)
    out << report.metric << ',' << m.name << ',' << m.correct << ',' << m.total << ',' << number(m.rate) << '\n';
  const MetricItem& a = report.aggregate;
  out << report.metric << ",all," << a.correct << ',' << a.total << ',' << number(a.rate) << '\n';
  return out.str();
}

json report_to_json(const MetricReport& report) {
  json items = json::array();
  for (const MetricItem& m : report.items) items.push_back(item_json(m));
  return {{"metric", report.metric},
          {"items", items},
          {"aggregate", item_json(report.aggregate)},
          {"samples", report.samples},
          {"parameters", report.parameters}};
}

MetricReport report_from_json(const json& doc) {
  json_util::reject_unknown_keys(doc, {"metric", "items", "aggregate", "samples", "parameters"}, "report");
  MetricReport r;
  r.metric = json_util::required<std::string>(doc, "metric", "report");
  for (const json& j : json_util::required<json>(doc, "items", "report")) r.items.push_back(item_from(j));
  r.aggregate = item_from(json_util::required<json>(doc, "aggregate", "report"));
  r.samples = json_util::required<std::size_t>(doc, "samples", "report");
  r.parameters = json_util::required<json>(doc, "parameters", "report");
  return r;
}

std::string pdj_csv(std::span<const PdjPoint> curve) {
  std::ostringstream out;
  out << "threshold,rate\n";
  for (const PdjPoint& p : curve) out << number(p.threshold) << ',' << number(p.rate) << '\n';
  return out.str();
}

}  // namespace hexpose
