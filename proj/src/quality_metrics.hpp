// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "annotation_store.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace vidanno {

double iou(const BBox& a, const BBox& b);

struct QualityMapParams {
  double alpha = 50.0;
  double beta = 2.0;
};

void validate(const QualityMapParams& p);

/// Maps IoU to a quality target that is zero at IoU 0.5, negative below and
/// positive above:
///   q = alpha^(1/beta) (iou - 0.5) / (1 + alpha |iou - 0.5|^beta)^(1/beta)
double quality_from_iou(double iou_value, const QualityMapParams& p = {});

struct EvalReport {
  double miou = 0.0;
  std::map<double, double> acc_at;  // threshold -> fraction with IoU > threshold
  double err_rate = 0.0;            // fraction of evaluated frames with IoU < 0.5
  double manual_fraction = 0.0;     // (manual + failure) / frame_count
  double labor_reduction = 0.0;     // 1 - manual_fraction
  int frame_count = 0;
  int evaluated = 0;
  int manual = 0;
  int failures = 0;
};

inline const std::vector<double> kDefaultAccThresholds{0.5, 0.7};

/// Metrics over automatic (non-manual, non-failure) frames. `ground_truth`
/// must hold a box for every frame referenced by `records`.
EvalReport evaluate(std::span<const AnnotationRecord> records, std::span<const BBox> ground_truth,
                    std::span<const double> acc_thresholds = kDefaultAccThresholds);

/// Labor accounting from counts alone.
double labor_reduction(int manual, int failures, int frame_count);

/// Pools per-video reports as if their frames had been evaluated together.
EvalReport combine_reports(std::span<const EvalReport> reports);

/// Flat `key=value` text, one metric per line.
std::string format_report(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& path);

}  // namespace vidanno
