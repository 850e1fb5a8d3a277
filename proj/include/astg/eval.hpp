// Copyright 2026 The astg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// STVG metrics: temporal IoU, union-normalized mean per-frame box IoU (vIoU)
// and vIoU@R, aggregated over a prediction set. Missing predictions score 0.

#include <algorithm>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "astg/error.hpp"
#include "astg/geometry.hpp"

namespace astg {

// One JSONL row: a temporal span and one box per frame of that span.
struct GroundTruth {
  std::string video_id;
  std::string query;
  TemporalSpan span;
  std::map<int, Box> boxes;  // exactly the frames of span
};

// Same row shape; boxes may be missing on span frames where the predicted
// tube produced no box.
struct Prediction {
  std::string video_id;
  std::string query;
  TemporalSpan span;
  std::map<int, Box> boxes;
};

inline double tiou(const TemporalSpan& gt, const TemporalSpan& pred) {
  const auto inter = intersect(gt, pred);
  if (!inter) return 0.0;
  const int uni = std::max(gt.ed, pred.ed) - std::min(gt.st, pred.st) + 1;
  return static_cast<double>(inter->length()) / static_cast<double>(uni);
}

// (1/|F_U|) * sum over t in F_I of IoU(gt box_t, pred box_t), with F_I and
// F_U the intersection and union of the two spans' frame sets.
inline double viou(const GroundTruth& gt, const Prediction& pred) {
  const auto inter = intersect(gt.span, pred.span);
  if (!inter) return 0.0;
  const int uni = std::max(gt.span.ed, pred.span.ed) - std::min(gt.span.st, pred.span.st) + 1;
  double sum = 0.0;
  for (int f = inter->st; f <= inter->ed; ++f) {
    const auto g = gt.boxes.find(f);
    const auto p = pred.boxes.find(f);
    if (g != gt.boxes.end() && p != pred.boxes.end()) sum += box_iou(g->second, p->second);
  }
  return sum / static_cast<double>(uni);
}

// Fraction of values strictly above r.
inline double viou_at_r(const std::vector<double>& vious, double r) {
  if (vious.empty()) return 0.0;
  const auto above = std::count_if(vious.begin(), vious.end(), [r](double v) { return v > r; });
  return static_cast<double>(above) / static_cast<double>(vious.size());
}

struct SampleMetrics {
  std::string video_id;
  double tiou = 0.0;
  double viou = 0.0;
  bool predicted = false;
};

struct MetricsReport {
  std::vector<SampleMetrics> samples;  // GT order
  double m_tiou = 0.0;
  double m_viou = 0.0;
  std::vector<std::pair<double, double>> viou_at;  // (R, fraction)
  int count = 0;
};

inline const std::vector<double>& default_thresholds() {
  static const std::vector<double> kDefault = {0.3, 0.5};
  return kDefault;
}

inline MetricsReport aggregate(const std::vector<GroundTruth>& gts,
                               const std::vector<Prediction>& preds,
                               const std::vector<double>& thresholds = default_thresholds()) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : preds) {
    if (!by_id.emplace(p.video_id, &p).second)
      throw EvalError("duplicate video_id in predictions: " + p.video_id);
  }
  std::set<std::string> gt_ids;
  for (const auto& g : gts) {
    if (!gt_ids.insert(g.video_id).second)
      throw EvalError("duplicate video_id in ground truth: " + g.video_id);
  }
  for (const auto& [id, p] : by_id) {
    if (!gt_ids.count(id)) throw EvalError("prediction without ground truth: " + id);
  }

  MetricsReport r;
  r.count = static_cast<int>(gts.size());
  std::vector<double> vious;
  for (const auto& g : gts) {
    SampleMetrics s{g.video_id, 0.0, 0.0, false};
    if (auto it = by_id.find(g.video_id); it != by_id.end()) {
      s.predicted = true;
      s.tiou = tiou(g.span, it->second->span);
      s.viou = viou(g, *it->second);
    }
    r.m_tiou += s.tiou;
    r.m_viou += s.viou;
    vious.push_back(s.viou);
    r.samples.push_back(std::move(s));
  }
  if (r.count > 0) {
    r.m_tiou /= r.count;
    r.m_viou /= r.count;
  }
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) throw EvalError("vIoU thresholds must lie in (0, 1)");
    r.viou_at.emplace_back(t, viou_at_r(vious, t));
  }
  return r;
}

// ---- JSONL ---------------------------------------------------------------

template <class Row>
nlohmann::json annotation_to_json(const Row& row) {
  nlohmann::json boxes = nlohmann::json::object();
  for (const auto& [f, b] : row.boxes) boxes[std::to_string(f)] = box_to_json(b);
  return {{"video_id", row.video_id}, {"query", row.query}, {"span", span_to_json(row.span)},
          {"boxes", boxes}};
}

namespace detail {

template <class Row>
Row annotation_from_json(const nlohmann::json& j, bool exact_boxes) {
  Row row;
  try {
    row.video_id = j.at("video_id").get<std::string>();
    row.query = j.value("query", std::string{});
    row.span = span_from_json(j.at("span"));
    for (const auto& [key, value] : j.at("boxes").items()) {
      std::size_t used = 0;
      const int f = std::stoi(key, &used);
      if (used != key.size()) throw EvalError("non-integer frame key: " + key);
      row.boxes[f] = box_from_json(value, f);
    }
  } catch (const nlohmann::json::exception& e) {
    throw EvalError(std::string("malformed annotation row: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw EvalError("malformed annotation row: bad frame key");
  } catch (const GeometryError& e) {
    throw EvalError(std::string("malformed annotation row: ") + e.what());
  }
  if (row.span.st < 0 || row.span.st > row.span.ed)
    throw EvalError("invalid span for " + row.video_id);
  for (const auto& [f, b] : row.boxes) {
    if (!row.span.contains(f)) throw EvalError("box outside span for " + row.video_id);
    if (!(b.x1 < b.x2 && b.y1 < b.y2)) throw EvalError("degenerate box for " + row.video_id);
  }
  if (exact_boxes && static_cast<int>(row.boxes.size()) != row.span.length())
    throw EvalError("ground truth must have a box on every span frame: " + row.video_id);
  return row;
}

template <class Row>
std::vector<Row> read_rows(std::istream& in, bool exact_boxes) {
  std::vector<Row> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw EvalError("line " + std::to_string(line_no) + ": " + e.what());
    }
    rows.push_back(annotation_from_json<Row>(j, exact_boxes));
  }
  return rows;
}

}  // namespace detail

inline std::vector<GroundTruth> read_ground_truth(std::istream& in) {
  return detail::read_rows<GroundTruth>(in, true);
}

inline std::vector<Prediction> read_predictions(std::istream& in) {
  return detail::read_rows<Prediction>(in, false);
}

template <class Row>
void write_jsonl(std::ostream& out, const std::vector<Row>& rows) {
  for (const auto& r : rows) out << annotation_to_json(r).dump() << '\n';
}

// ---- Report --------------------------------------------------------------

inline std::string format_threshold(double r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

inline void write_report_table(std::ostream& out, const MetricsReport& r) {
  out << "# vIoU@R counts samples whose vIoU is strictly above R\n";
  out << std::left << std::setw(10) << "samples" << std::setw(10) << "m_tIoU" << std::setw(10)
      << "m_vIoU";
  for (const auto& [t, v] : r.viou_at) out << std::setw(10) << ("vIoU@" + format_threshold(t));
  out << '\n' << std::fixed << std::setprecision(4);
  out << std::setw(10) << r.count << std::setw(10) << r.m_tiou << std::setw(10) << r.m_viou;
  for (const auto& [t, v] : r.viou_at) out << std::setw(10) << v;
  out << '\n';
  out.unsetf(std::ios::fixed);
  out << std::setprecision(6);
}

inline void write_per_sample_csv(std::ostream& out, const MetricsReport& r) {
  out << "video_id,predicted,tiou,viou\n" << std::fixed << std::setprecision(6);
  for (const auto& s : r.samples)
    out << s.video_id << ',' << (s.predicted ? 1 : 0) << ',' << s.tiou << ',' << s.viou << '\n';
  out.unsetf(std::ios::fixed);
}

inline void write_aggregate_csv(std::ostream& out, const MetricsReport& r) {
  out << "metric,value\n" << std::fixed << std::setprecision(6);
  out << "samples," << r.count << '\n';
  out << "m_tIoU," << r.m_tiou << '\n';
  out << "m_vIoU," << r.m_viou << '\n';
  for (const auto& [t, v] : r.viou_at) out << "vIoU@" << format_threshold(t) << ',' << v << '\n';
  out.unsetf(std::ios::fixed);
}

}  // namespace astg
