// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "plot.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vidanno {

namespace {

constexpr double kWidth = 720, kHeight = 400;
constexpr double kLeft = 64, kRight = 160, kTop = 36, kBottom = 48;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double x_lo, x_hi, y_lo, y_hi;
  double px(double x) const { return kLeft + (x - x_lo) / (x_hi - x_lo) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y_lo) / (y_hi - y_lo) * (kHeight - kTop - kBottom); }
};

void widen(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string open(const ChartLabels& labels, const Frame& f, bool x_ticks = true) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
                  "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
       escape(labels.title) + "</text>\n";
  const double x0 = f.px(f.x_lo), x1 = f.px(f.x_hi), y0 = f.py(f.y_lo), y1 = f.py(f.y_hi);
  s += "<rect x=\"" + num(x0) + "\" y=\"" + num(y1) + "\" width=\"" + num(x1 - x0) + "\" height=\"" + num(y0 - y1) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x_lo + (f.x_hi - f.x_lo) * i / 4, yv = f.y_lo + (f.y_hi - f.y_lo) * i / 4;
    if (x_ticks) {
      s += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(y0 + 16) + "\" text-anchor=\"middle\">" + tick_label(xv) +
           "</text>\n";
    }
    s += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(f.py(yv) + 4) + "\" text-anchor=\"end\">" + tick_label(yv) +
         "</text>\n";
  }
  s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 10) + "\" text-anchor=\"middle\">" +
       escape(labels.x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num((y0 + y1) / 2) + ")\">" + escape(labels.y_label) + "</text>\n";
  return s;
}

}  // namespace

std::string line_chart_svg(std::span<const LineSeries> series, const ChartLabels& labels,
                           std::span<const double> reference_y) {
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw_invalid("series '" + s.name + "' has mismatched x/y lengths");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  for (double r : reference_y) {
    y_lo = std::min(y_lo, r);
    y_hi = std::max(y_hi, r);
  }
  widen(x_lo, x_hi);
  widen(y_lo, y_hi);
  const Frame f{x_lo, x_hi, y_lo, y_hi};
  std::string svg = open(labels, f);
  for (double r : reference_y) {
    svg += "<line x1=\"" + num(f.px(x_lo)) + "\" x2=\"" + num(f.px(x_hi)) + "\" y1=\"" + num(f.py(r)) + "\" y2=\"" +
           num(f.py(r)) + "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    std::string pts;
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      if (!std::isfinite(series[k].x[i]) || !std::isfinite(series[k].y[i])) continue;
      pts += num(f.px(series[k].x[i])) + "," + num(f.py(series[k].y[i])) + " ";
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.2\" points=\"" + pts +
           "\"/>\n";
    const double ly = kTop + 16 + 18 * static_cast<double>(k);
    svg += "<line x1=\"" + num(kWidth - kRight + 12) + "\" x2=\"" + num(kWidth - kRight + 32) + "\" y1=\"" + num(ly) +
           "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + num(kWidth - kRight + 38) + "\" y=\"" + num(ly + 4) + "\">" + escape(series[k].name) +
           "</text>\n";
  }
  return svg + "</svg>\n";
}

std::string histogram_svg(std::span<const double> values, int bins, double lo, double hi, const ChartLabels& labels) {
  if (bins < 1) throw_invalid("histogram needs at least one bin");
  if (!(hi > lo)) throw_invalid("histogram range is empty");
  std::vector<int> counts(bins, 0);
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    const int b = std::clamp(static_cast<int>(std::floor((v - lo) / (hi - lo) * bins)), 0, bins - 1);
    ++counts[b];
  }
  const int peak = std::max(1, *std::max_element(counts.begin(), counts.end()));
  const Frame f{lo, hi, 0.0, static_cast<double>(peak)};
  std::string svg = open(labels, f);
  for (int b = 0; b < bins; ++b) {
    const double x0 = f.px(lo + (hi - lo) * b / bins), x1 = f.px(lo + (hi - lo) * (b + 1) / bins);
    const double y = f.py(counts[b]);
    svg += "<rect x=\"" + num(x0) + "\" y=\"" + num(y) + "\" width=\"" + num(std::max(0.0, x1 - x0 - 1)) +
           "\" height=\"" + num(f.py(0) - y) + "\" fill=\"" + kPalette[0] + "\"/>\n";
  }
  return svg + "</svg>\n";
}

std::string bar_chart_svg(std::span<const std::string> names, std::span<const double> values,
                          const ChartLabels& labels) {
  if (names.size() != values.size()) throw_invalid("bar chart needs one value per label");
  double y_lo = 0.0, y_hi = 0.0;
  for (double v : values) {
    y_lo = std::min(y_lo, v);
    y_hi = std::max(y_hi, v);
  }
  widen(y_lo, y_hi);
  const double n = std::max<double>(1.0, static_cast<double>(names.size()));
  const Frame f{0.0, n, y_lo, y_hi};
  std::string svg = open(labels, f, false);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double x0 = f.px(i + 0.15), x1 = f.px(i + 0.85);
    const double top = f.py(std::max(values[i], 0.0)), bottom = f.py(std::min(values[i], 0.0));
    svg += "<rect x=\"" + num(x0) + "\" y=\"" + num(top) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
           num(bottom - top) + "\" fill=\"" + kPalette[i % std::size(kPalette)] + "\"/>\n";
    svg += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(top - 4) + "\" text-anchor=\"middle\">" +
           tick_label(values[i]) + "</text>\n";
    svg += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - kBottom + 30) +
           "\" text-anchor=\"middle\" font-size=\"10\">" + escape(names[i]) + "</text>\n";
  }
  return svg + "</svg>\n";
}

void write_svg(const std::string& svg, const std::filesystem::path& path) { write_text_file(path, svg); }

}  // namespace vidanno
