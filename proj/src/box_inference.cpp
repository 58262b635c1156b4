// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "box_inference.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>

namespace vidanno {

using nn::Matrix;

void validate(const InferenceConfig& cfg) {
  if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) throw_invalid("tau must lie in (0, 1]");
  // Accepted records must carry a positive quality.
  if (!(cfg.failure_threshold >= 0.0) || !std::isfinite(cfg.failure_threshold)) {
    throw_invalid("failure threshold must be finite and non-negative");
  }
}

std::optional<GridBox> mask_box_indices(const Mask& mask, double tau) {
  const Eigen::VectorXd sv = aggregate(mask, Axis::kVertical, Aggregation::kRectified);
  const Eigen::VectorXd sh = aggregate(mask, Axis::kHorizontal, Aggregation::kRectified);
  GridBox g{-1, -1, -1, -1};
  for (int j = 0; j < sv.size(); ++j) {
    if (sv(j) > tau) {
      if (g.col_min < 0) g.col_min = j;
      g.col_max = j;
    }
  }
  for (int i = 0; i < sh.size(); ++i) {
    if (sh(i) > tau) {
      if (g.row_min < 0) g.row_min = i;
      g.row_max = i;
    }
  }
  if (g.col_min < 0 || g.row_min < 0) return std::nullopt;
  return g;
}

std::optional<BBox> refine_box(const Mask& mask, const SearchRegion& region, const InferenceConfig& cfg) {
  if (mask.rows() != region.rows || mask.cols() != region.cols) throw_invalid("mask does not match its search region");
  const auto g = mask_box_indices(mask, cfg.tau);
  if (!g) return std::nullopt;
  BBox b{region.col_to_x(g->col_min), region.row_to_y(g->row_min), region.col_to_x(g->col_max + 1.0),
         region.row_to_y(g->row_max + 1.0)};
  b.x_min = std::max(b.x_min, region.clip.x_min);
  b.y_min = std::max(b.y_min, region.clip.y_min);
  b.x_max = std::min(b.x_max, region.clip.x_max);
  b.y_max = std::min(b.y_max, region.clip.y_max);
  if (!b.valid()) return std::nullopt;
  return b;
}

AnnotationRecord select_and_flag(int frame_idx, double g_forward, double g_backward,
                                 const std::optional<BBox>& refined_forward,
                                 const std::optional<BBox>& refined_backward, const BBox& fallback_forward,
                                 const BBox& fallback_backward, const InferenceConfig& cfg) {
  AnnotationRecord rec;
  rec.frame_idx = frame_idx;
  const bool forward = g_forward >= g_backward;
  const double best = forward ? g_forward : g_backward;
  if (!(best > cfg.failure_threshold)) {
    rec.source = Source::kFailure;
    return rec;
  }
  rec.source = forward ? Source::kForward : Source::kBackward;
  rec.box = forward ? refined_forward.value_or(fallback_forward) : refined_backward.value_or(fallback_backward);
  rec.quality = best;
  return rec;
}

const char* to_string(RefineMode m) {
  switch (m) {
    case RefineMode::kNone: return "none";
    case RefineMode::kVisual: return "visual";
    case RefineMode::kVisualGeometric: return "geometric";
  }
  return "?";
}

RefineMode parse_refine_mode(const std::string& s) {
  for (auto m : {RefineMode::kNone, RefineMode::kVisual, RefineMode::kVisualGeometric}) {
    if (s == to_string(m)) return m;
  }
  throw_invalid("unknown refine mode '" + s + "' (none, visual, geometric)");
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::kForward: return "Fwd";
    case Variant::kBackward: return "Bwd";
    case Variant::kSelect: return "Sel";
    case Variant::kSelectFail: return "Sel-fail";
    case Variant::kVisualRefine: return "V-Refine";
    case Variant::kGeometricRefine: return "VG-Refine";
  }
  return "?";
}

namespace {

constexpr std::size_t kBatch = 64;

// Per-frame mean of a per-slot quantity over all windows of one direction.
template <typename SlotFn>
std::map<int, double> scatter(const std::vector<Window>& windows, SlotFn&& slot_value) {
  std::vector<std::vector<double>> values(windows.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    values[w].resize(windows[w].length);
    for (int t = 0; t < windows[w].length; ++t) values[w][t] = slot_value(w, t);
  }
  return scatter_window_outputs(windows, values);
}

// Raw outputs (rows x slots) of `net` for every window, one batch per chunk.
std::vector<Matrix> run_windows(const DirectionalModel& net, const std::vector<Window>& windows, Direction d,
                                const VideoMeta& meta) {
  std::vector<Matrix> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); i += kBatch) {
    const std::size_t n = std::min(kBatch, windows.size() - i);
    std::vector<BatchItem> items;
    for (std::size_t k = 0; k < n; ++k) items.push_back({&windows[i + k], meta.frame_width, meta.frame_height});
    const FrameBatch fb = make_frame_batch(std::span<const BatchItem>(items), net.config().map_size);
    const Matrix y = net.forward(fb, d, nullptr);
    for (std::size_t k = 0; k < n; ++k) {
      out[i + k].resize(y.rows(), fb.steps);
      for (int t = 0; t < fb.steps; ++t) out[i + k].col(t) = y.col(t * fb.batch + static_cast<int>(k));
    }
  }
  return out;
}

}  // namespace

AnnotationResult annotate_video(const SequenceData& data, const AssessModel& assess, const GeometryModel* geometry,
                                const MaskPredictor* masks, const VideoContext* video, const AnnotateConfig& cfg) {
  validate(cfg.inference);
  validate_meta(data.meta);
  const bool visual = cfg.refine != RefineMode::kNone;
  const bool geometric = cfg.refine == RefineMode::kVisualGeometric;
  if (visual && (!masks || !video)) throw_invalid("refinement needs a mask predictor and video context");
  if (geometric && !geometry) throw_invalid("geometric refinement needs a geometry model");

  const auto snippets = snippets_of(data);
  const MergedVideo merged = merge_directions(snippets, data.manual);

  std::array<std::map<int, double>, 2> scores;
  std::array<std::map<int, GaussianParams>, 2> thetas;
  for (Direction d : {Direction::kForward, Direction::kBackward}) {
    std::vector<Window> windows;
    for (const auto& s : snippets) {
      auto w = make_windows(d == Direction::kForward ? s.frames_fwd : s.frames_bwd, cfg.window_length, cfg.stride);
      std::move(w.begin(), w.end(), std::back_inserter(windows));
    }
    const auto g = run_windows(assess.net(), windows, d, data.meta);
    scores[index_of(d)] = scatter(windows, [&](std::size_t w, int t) { return g[w](0, t); });
    if (geometric) {
      const auto raw = run_windows(geometry->net(), windows, d, data.meta);
      std::array<std::map<int, double>, 5> mean_raw;
      for (int k = 0; k < 5; ++k) mean_raw[k] = scatter(windows, [&](std::size_t w, int t) { return raw[w](k, t); });
      for (const auto& [frame, v0] : mean_raw[0]) {
        const std::array<double, 5> r{v0, mean_raw[1][frame], mean_raw[2][frame], mean_raw[3][frame],
                                      mean_raw[4][frame]};
        thetas[index_of(d)][frame] = theta_from_raw(r);
      }
    }
  }

  AnnotationResult result;
  result.records.reserve(data.meta.frame_count);
  for (int f = 0; f < data.meta.frame_count; ++f) {
    if (auto a = merged.anchors.find(f); a != merged.anchors.end()) {
      AnnotationRecord rec;
      rec.frame_idx = f;
      rec.source = Source::kManual;
      rec.box = a->second;
      result.records.push_back(rec);
      continue;
    }
    const auto it = merged.pairs.find(f);
    if (it == merged.pairs.end()) throw Error(ErrorCode::kInternal, "frame " + std::to_string(f) + " not covered");
    FrameDiagnostics diag;
    diag.frame_idx = f;
    for (Direction d : {Direction::kForward, Direction::kBackward}) {
      const int k = index_of(d);
      const TrackedFrame& tf = d == Direction::kForward ? it->second.forward : it->second.backward;
      diag.tracker[k] = tf.box;
      diag.score[k] = scores[k].at(f);
      if (!visual) continue;
      const SearchRegion region =
          make_search_region(tf.box, data.meta.frame_width, data.meta.frame_height, cfg.rows, cfg.cols);
      const Mask initial = masks->predict(MaskQuery{*video, f, d, region});
      diag.visual[k] = refine_box(initial, region, cfg.inference);
      if (geometric) {
        diag.theta[k] = thetas[k].at(f);
        const Mask weighted = apply_weight(initial, gaussian_weight_map(diag.theta[k], cfg.rows, cfg.cols));
        diag.geometric[k] = refine_box(weighted, region, cfg.inference);
      }
    }
    const auto& refined = geometric ? diag.geometric : diag.visual;
    AnnotationRecord rec = select_and_flag(f, diag.score[0], diag.score[1], refined[0], refined[1], diag.tracker[0],
                                           diag.tracker[1], cfg.inference);
    if (rec.source == Source::kFailure) result.failures.push_back(f);
    result.records.push_back(rec);
    result.frames.push_back(diag);
  }
  validate_finished(result.records, data.meta);
  return result;
}

std::vector<AnnotationRecord> variant_records(const AnnotationResult& result, const std::map<int, BBox>& manual,
                                              Variant variant, const InferenceConfig& cfg) {
  std::vector<AnnotationRecord> out;
  out.reserve(manual.size() + result.frames.size());
  for (const auto& [f, box] : manual) out.push_back({f, Source::kManual, box, std::nullopt});
  for (const auto& d : result.frames) {
    AnnotationRecord rec;
    rec.frame_idx = d.frame_idx;
    switch (variant) {
      case Variant::kForward:
      case Variant::kBackward: {
        const int k = variant == Variant::kForward ? 0 : 1;
        rec.source = k == 0 ? Source::kForward : Source::kBackward;
        rec.box = d.tracker[k];
        rec.quality = d.score[k];
        break;
      }
      case Variant::kSelect: {
        const int k = d.score[0] >= d.score[1] ? 0 : 1;
        rec.source = k == 0 ? Source::kForward : Source::kBackward;
        rec.box = d.tracker[k];
        rec.quality = d.score[k];
        break;
      }
      case Variant::kSelectFail:
        rec = select_and_flag(d.frame_idx, d.score[0], d.score[1], std::nullopt, std::nullopt, d.tracker[0],
                              d.tracker[1], cfg);
        break;
      case Variant::kVisualRefine:
        rec = select_and_flag(d.frame_idx, d.score[0], d.score[1], d.visual[0], d.visual[1], d.tracker[0],
                              d.tracker[1], cfg);
        break;
      case Variant::kGeometricRefine:
        rec = select_and_flag(d.frame_idx, d.score[0], d.score[1], d.geometric[0], d.geometric[1], d.tracker[0],
                              d.tracker[1], cfg);
        break;
    }
    out.push_back(rec);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.frame_idx < b.frame_idx; });
  return out;
}

namespace {

constexpr std::string_view kDiagMagic = "VIDANNO-DIAG/1";

void append_box(std::string& out, const std::optional<BBox>& b) {
  if (b) {
    out += ',' + format_double(b->x_min) + ',' + format_double(b->y_min) + ',' + format_double(b->x_max) + ',' +
           format_double(b->y_max);
  } else {
    out += ",,,,";
  }
}

std::optional<BBox> parse_box(std::span<const std::string_view> f) {
  if (f[0].empty() && f[1].empty() && f[2].empty() && f[3].empty()) return std::nullopt;
  return BBox{parse_double(f[0]), parse_double(f[1]), parse_double(f[2]), parse_double(f[3])};
}

}  // namespace

void write_diagnostics(std::span<const FrameDiagnostics> frames, const std::filesystem::path& path) {
  std::string out(kDiagMagic);
  out += '\n';
  for (const auto& d : frames) {
    out += std::to_string(d.frame_idx);
    for (int k = 0; k < 2; ++k) {
      out += ',' + format_double(d.score[k]);
      append_box(out, d.tracker[k]);
      append_box(out, d.visual[k]);
      append_box(out, d.geometric[k]);
      const auto& t = d.theta[k];
      for (double v : {t.mu1, t.mu2, t.sigma1, t.sigma2, t.alpha}) out += ',' + format_double(v);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<FrameDiagnostics> read_diagnostics(const std::filesystem::path& path) {
  std::vector<FrameDiagnostics> out;
  int line_no = 0;
  bool header = false;
  constexpr std::size_t kPerDir = 1 + 12 + 5;
  const std::string text = read_text_file(path);
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (!header) {
        if (line != kDiagMagic) throw_format("bad diagnostics header");
        header = true;
        continue;
      }
      const auto f = split(line, ',');
      if (f.size() != 1 + 2 * kPerDir) throw_format("expected " + std::to_string(1 + 2 * kPerDir) + " fields");
      FrameDiagnostics d;
      d.frame_idx = static_cast<int>(parse_int(f[0]));
      for (int k = 0; k < 2; ++k) {
        const std::span<const std::string_view> g(f.data() + 1 + k * kPerDir, kPerDir);
        d.score[k] = parse_double(g[0]);
        auto tracker = parse_box(g.subspan(1, 4));
        if (!tracker) throw_format("missing tracker box");
        d.tracker[k] = *tracker;
        d.visual[k] = parse_box(g.subspan(5, 4));
        d.geometric[k] = parse_box(g.subspan(9, 4));
        d.theta[k] = {parse_double(g[13]), parse_double(g[14]), parse_double(g[15]), parse_double(g[16]),
                      parse_double(g[17])};
      }
      out.push_back(d);
    } catch (const Error& e) {
      throw_format(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw_format(path.string() + ": missing diagnostics header");
  return out;
}

}  // namespace vidanno
