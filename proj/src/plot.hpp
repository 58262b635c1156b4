// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal static SVG charts for reports.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vidanno {

struct LineSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

/// Line chart; `reference_y` draws dashed horizontal lines (e.g. a threshold).
std::string line_chart_svg(std::span<const LineSeries> series, const ChartLabels& labels,
                           std::span<const double> reference_y = {});

/// Histogram of `values` over [lo, hi) with `bins` equal bins; values outside are clamped.
std::string histogram_svg(std::span<const double> values, int bins, double lo, double hi, const ChartLabels& labels);

/// One bar per label, y axis from 0 (or the smallest value if negative) to the largest value.
std::string bar_chart_svg(std::span<const std::string> names, std::span<const double> values,
                          const ChartLabels& labels);

void write_svg(const std::string& svg, const std::filesystem::path& path);

}  // namespace vidanno
