// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "quality_metrics.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vidanno {

double iou(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

void validate(const QualityMapParams& p) {
  if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) throw_invalid("quality alpha must be positive");
  if (!(p.beta >= 1.0) || !std::isfinite(p.beta)) throw_invalid("quality beta must be >= 1");
}

double quality_from_iou(double iou_value, const QualityMapParams& p) {
  const double u = iou_value - 0.5;
  if (u == 0.0) return 0.0;
  const double num = std::pow(p.alpha, 1.0 / p.beta) * u;
  const double den = std::pow(1.0 + p.alpha * std::pow(std::abs(u), p.beta), 1.0 / p.beta);
  return num / den;
}

EvalReport evaluate(std::span<const AnnotationRecord> records, std::span<const BBox> ground_truth,
                    std::span<const double> acc_thresholds) {
  EvalReport r;
  r.frame_count = static_cast<int>(records.size());
  double iou_sum = 0.0;
  std::vector<int> above(acc_thresholds.size(), 0);
  int below_half = 0;
  for (const auto& rec : records) {
    if (rec.frame_idx < 0 || rec.frame_idx >= static_cast<int>(ground_truth.size())) {
      throw_invalid("missing ground truth for frame " + std::to_string(rec.frame_idx));
    }
    if (rec.source == Source::kManual) {
      ++r.manual;
      continue;
    }
    if (rec.source == Source::kFailure) {
      ++r.failures;
      continue;
    }
    if (!rec.box) throw_invalid("frame " + std::to_string(rec.frame_idx) + " has no box");
    const double v = iou(*rec.box, ground_truth[rec.frame_idx]);
    ++r.evaluated;
    iou_sum += v;
    for (std::size_t t = 0; t < acc_thresholds.size(); ++t) {
      if (v > acc_thresholds[t]) ++above[t];
    }
    if (v < 0.5) ++below_half;
  }
  if (r.evaluated > 0) {
    r.miou = iou_sum / r.evaluated;
    r.err_rate = static_cast<double>(below_half) / r.evaluated;
  }
  for (std::size_t t = 0; t < acc_thresholds.size(); ++t) {
    r.acc_at[acc_thresholds[t]] = r.evaluated > 0 ? static_cast<double>(above[t]) / r.evaluated : 0.0;
  }
  if (r.frame_count > 0) {
    r.manual_fraction = static_cast<double>(r.manual + r.failures) / r.frame_count;
  }
  r.labor_reduction = 1.0 - r.manual_fraction;
  return r;
}

double labor_reduction(int manual, int failures, int frame_count) {
  if (frame_count <= 0) throw_invalid("frame_count must be positive");
  if (manual < 0 || failures < 0 || manual + failures > frame_count) {
    throw_invalid("manual + failure count exceeds frame count");
  }
  return 1.0 - static_cast<double>(manual + failures) / frame_count;
}

EvalReport combine_reports(std::span<const EvalReport> reports) {
  EvalReport r;
  double iou_sum = 0.0, err_sum = 0.0;
  std::map<double, double> acc_sum;
  for (const auto& x : reports) {
    r.frame_count += x.frame_count;
    r.evaluated += x.evaluated;
    r.manual += x.manual;
    r.failures += x.failures;
    iou_sum += x.miou * x.evaluated;
    err_sum += x.err_rate * x.evaluated;
    for (const auto& [t, v] : x.acc_at) acc_sum[t] += v * x.evaluated;
  }
  if (r.evaluated > 0) {
    r.miou = iou_sum / r.evaluated;
    r.err_rate = err_sum / r.evaluated;
  }
  for (const auto& [t, v] : acc_sum) r.acc_at[t] = r.evaluated > 0 ? v / r.evaluated : 0.0;
  if (r.frame_count > 0) r.manual_fraction = static_cast<double>(r.manual + r.failures) / r.frame_count;
  r.labor_reduction = 1.0 - r.manual_fraction;
  return r;
}

std::string format_report(const EvalReport& report) {
  std::string out;
  auto line = [&](const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    out += key + "=" + buf + "\n";
  };
  line("miou", report.miou);
  for (const auto& [t, v] : report.acc_at) {
    char key[32];
    std::snprintf(key, sizeof(key), "acc@%.2g", t);
    line(key, v);
  }
  line("err_rate", report.err_rate);
  line("manual_fraction", report.manual_fraction);
  line("labor_reduction", report.labor_reduction);
  out += "frame_count=" + std::to_string(report.frame_count) + "\n";
  out += "evaluated=" + std::to_string(report.evaluated) + "\n";
  out += "manual=" + std::to_string(report.manual) + "\n";
  out += "failures=" + std::to_string(report.failures) + "\n";
  return out;
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  write_text_file(path, format_report(report));
}

}  // namespace vidanno
