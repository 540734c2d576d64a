#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tempseg/core.hpp"
#include "tempseg/error.hpp"

namespace tempseg {

// A per-frame metric series with its frame-to-frame differences and the
// population standard deviation of those differences (the temporal
// consistency score; signed diffs, divisor = diff count).
struct SeriesReport {
  std::vector<double> per_frame;
  std::vector<double> diffs;  // diffs[i] = per_frame[i+1] - per_frame[i]
  double variation_std = 0.0;

  friend bool operator==(const SeriesReport&, const SeriesReport&) = default;
};

inline SeriesReport make_series_report(std::vector<double> per_frame) {
  SeriesReport report;
  report.per_frame = std::move(per_frame);
  if (report.per_frame.size() > 1) {
    report.diffs.reserve(report.per_frame.size() - 1);
    for (std::size_t i = 0; i + 1 < report.per_frame.size(); ++i) {
      report.diffs.push_back(report.per_frame[i + 1] - report.per_frame[i]);
    }
    double mean = 0.0;
    for (double d : report.diffs) mean += d;
    mean /= static_cast<double>(report.diffs.size());
    double accum = 0.0;
    for (double d : report.diffs) accum += (d - mean) * (d - mean);
    report.variation_std = std::sqrt(accum / static_cast<double>(report.diffs.size()));
  }
  return report;
}

// Pixels carrying `category` per frame (the paper's area-over-time).
inline SeriesReport area_series(std::span<const LabelMap> labels, int category,
                                const CategoryTable& categories) {
  if (category < 0 || category >= categories.size()) {
    throw ConfigError("category index " + std::to_string(category) + " outside 0.." +
                      std::to_string(categories.size() - 1));
  }
  std::vector<double> areas;
  areas.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i].shape_equals(labels[0])) {
      throw ShapeError("frame " + std::to_string(i) + " has shape " + labels[i].shape_string() +
                       ", sequence started with " + labels[0].shape_string());
    }
    long long count = 0;
    for (std::uint8_t label : labels[i].labels()) {
      if (label == category) ++count;
    }
    areas.push_back(static_cast<double>(count));
  }
  return make_series_report(std::move(areas));
}

// Intersection over union of the predicted category region against a
// ground-truth mask; 1.0 when both regions are empty.
inline double iou(const LabelMap& pred, const BinaryMask& truth, int category) {
  if (pred.height() != truth.height() || pred.width() != truth.width()) {
    throw ShapeError("prediction " + pred.shape_string() + " vs mask " + truth.shape_string());
  }
  long long intersection = 0;
  long long union_count = 0;
  const std::span<const std::uint8_t> labels = pred.labels();
  const std::span<const std::uint8_t> bits = truth.bits();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool in_pred = labels[i] == category;
    const bool in_truth = bits[i] != 0;
    intersection += (in_pred && in_truth) ? 1 : 0;
    union_count += (in_pred || in_truth) ? 1 : 0;
  }
  if (union_count == 0) return 1.0;
  return static_cast<double>(intersection) / static_cast<double>(union_count);
}

inline SeriesReport iou_series(std::span<const LabelMap> preds, std::span<const BinaryMask> truths,
                               int category) {
  if (preds.size() != truths.size()) {
    throw AlignmentError("got " + std::to_string(preds.size()) + " predictions for " +
                         std::to_string(truths.size()) + " ground-truth masks");
  }
  std::vector<double> values;
  values.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    values.push_back(iou(preds[i], truths[i], category));
  }
  return make_series_report(std::move(values));
}

struct MethodSeries {
  std::string method;
  SeriesReport area;
  std::optional<SeriesReport> iou;
};

struct ComparisonRow {
  std::string method;
  double area_variation_std = 0.0;
  std::optional<double> iou_variation_std;
  bool best_area = false;
  bool best_iou = false;
};

// One row per method, input order preserved; the lowest variation STD per
// metric is flagged (ties to the lexicographically first method name).
struct ComparisonTable {
  std::vector<ComparisonRow> rows;
};

inline ComparisonTable compare_methods(std::span<const MethodSeries> reports) {
  if (reports.empty()) throw Error("compare_methods needs at least one report");
  ComparisonTable table;
  table.rows.reserve(reports.size());
  for (const MethodSeries& r : reports) {
    ComparisonRow row;
    row.method = r.method;
    row.area_variation_std = r.area.variation_std;
    if (r.iou) row.iou_variation_std = r.iou->variation_std;
    table.rows.push_back(std::move(row));
  }

  const ComparisonRow* best_area = nullptr;
  const ComparisonRow* best_iou = nullptr;
  for (const ComparisonRow& row : table.rows) {
    if (!best_area || row.area_variation_std < best_area->area_variation_std ||
        (row.area_variation_std == best_area->area_variation_std &&
         row.method < best_area->method)) {
      best_area = &row;
    }
    if (row.iou_variation_std &&
        (!best_iou || *row.iou_variation_std < *best_iou->iou_variation_std ||
         (*row.iou_variation_std == *best_iou->iou_variation_std &&
          row.method < best_iou->method))) {
      best_iou = &row;
    }
  }
  for (ComparisonRow& row : table.rows) {
    row.best_area = &row == best_area;
    row.best_iou = best_iou && &row == best_iou;
  }
  return table;
}

// Plain-text rendering; '*' marks the lowest variation STD per column.
inline std::string format_comparison(const ComparisonTable& table) {
  std::size_t name_width = std::string("method").size();
  for (const ComparisonRow& row : table.rows) {
    name_width = std::max(name_width, row.method.size());
  }
  std::string out = "method";
  out.append(name_width - 6 + 2, ' ');
  out += "aot_variation_std  iou_variation_std\n";
  char buf[64];
  for (const ComparisonRow& row : table.rows) {
    out += row.method;
    out.append(name_width - row.method.size() + 2, ' ');
    std::snprintf(buf, sizeof buf, "%s%-17.6f", row.best_area ? "*" : " ", row.area_variation_std);
    out += buf;
    out += ' ';
    if (row.iou_variation_std) {
      std::snprintf(buf, sizeof buf, "%s%.6f", row.best_iou ? "*" : " ", *row.iou_variation_std);
      out += buf;
    } else {
      out += " -";
    }
    out += '\n';
  }
  return out;
}

}  // namespace tempseg
