// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth_oracle.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace vidanno {

void validate(const SynthConfig& c) {
  if (c.frame_count < 2) throw_invalid("synthetic sequences need at least 2 frames");
  if (c.width < 16 || c.height < 16) throw_invalid("synthetic frames must be at least 16x16");
  if (c.anchor_interval < 1) throw_invalid("anchor interval must be positive");
  if (c.map_size < 4) throw_invalid("response maps must be at least 4x4");
  if (!(c.min_size > 0 && c.min_size <= c.max_size)) throw_invalid("need 0 < min_size <= max_size");
  if (1.6 * c.max_size >= std::min(c.width, c.height)) throw_invalid("targets must fit inside the frame");
  for (double v : {c.max_speed, c.accel_sigma, c.scale_sigma, c.sigma_pos, c.sigma_scale, c.walk_ratio,
                   c.drift_rate, c.occlusion_gain, c.response_noise, c.pixel_noise, c.confidence_noise,
                   c.mask_noise_density, c.mask_noise_level, c.occlusion_damping}) {
    if (!(v >= 0) || !std::isfinite(v)) throw_invalid("synthetic noise parameters must be finite and non-negative");
  }
  if (!(c.ar >= 0 && c.ar < 1)) throw_invalid("ar must lie in [0, 1)");
  if (!(c.p_drift >= 0 && c.p_drift <= 1)) throw_invalid("p_drift must lie in [0, 1]");
  if (!(c.occlusion_rate >= 0 && c.occlusion_rate <= 1)) throw_invalid("occlusion_rate must lie in [0, 1]");
  if (c.occlusion_min < 1 || c.occlusion_max < c.occlusion_min) throw_invalid("bad occlusion length range");
  if (c.distractors < 0) throw_invalid("distractor count must be non-negative");
  if (!(c.distractor_radius_min > 0 && c.distractor_radius_min <= c.distractor_radius_max)) {
    throw_invalid("need 0 < distractor_radius_min <= distractor_radius_max");
  }
  if (c.mask_noise_density > 1) throw_invalid("mask noise density must be at most 1");
}

namespace {

using Rng = std::mt19937_64;

Rng stream(const SynthConfig& cfg, std::uint64_t id) { return Rng(mix_seed(cfg.seed, id)); }

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

std::vector<BBox> generate_track(const SynthConfig& cfg) {
  Rng rng = stream(cfg, 1);
  const double w0 = uniform(rng, cfg.min_size, cfg.max_size);
  const double aspect = std::exp(uniform(rng, std::log(0.6), std::log(1.6)));
  const double h0 = std::clamp(w0 / aspect, 0.6 * cfg.min_size, cfg.max_size);
  double cx = uniform(rng, 0.3, 0.7) * cfg.width;
  double cy = uniform(rng, 0.3, 0.7) * cfg.height;
  double vx = 0, vy = 0, s = 1;
  std::vector<BBox> track;
  track.reserve(cfg.frame_count);
  for (int f = 0; f < cfg.frame_count; ++f) {
    if (f > 0) {
      vx += cfg.accel_sigma * normal(rng);
      vy += cfg.accel_sigma * normal(rng);
      const double speed = std::hypot(vx, vy);
      if (speed > cfg.max_speed) {
        vx *= cfg.max_speed / speed;
        vy *= cfg.max_speed / speed;
      }
      s = std::clamp(s * std::exp(cfg.scale_sigma * normal(rng)), 0.6, 1.6);
      cx += vx;
      cy += vy;
    }
    const double hw = 0.5 * w0 * s + 2, hh = 0.5 * h0 * s + 2;
    if (cx < hw) { cx = 2 * hw - cx; vx = std::abs(vx); }
    if (cx > cfg.width - hw) { cx = 2 * (cfg.width - hw) - cx; vx = -std::abs(vx); }
    if (cy < hh) { cy = 2 * hh - cy; vy = std::abs(vy); }
    if (cy > cfg.height - hh) { cy = 2 * (cfg.height - hh) - cy; vy = -std::abs(vy); }
    track.push_back(BBox::from_center(cx, cy, w0 * s, h0 * s));
  }
  return track;
}

std::vector<bool> generate_occlusions(const SynthConfig& cfg) {
  Rng rng = stream(cfg, 2);
  std::vector<bool> occ(cfg.frame_count, false);
  for (int f = 0; f < cfg.frame_count; ++f) {
    if (uniform(rng, 0, 1) >= cfg.occlusion_rate) continue;
    const int len = std::uniform_int_distribution<int>(cfg.occlusion_min, cfg.occlusion_max)(rng);
    for (int k = f; k < std::min(cfg.frame_count, f + len); ++k) occ[k] = true;
    f += len;
  }
  return occ;
}

std::shared_ptr<MapGrid> response_map(const SynthConfig& cfg, double iou_value, double damping, Rng& rng) {
  const int r = cfg.map_size;
  auto map = std::make_shared<MapGrid>(r, r);
  const double noise = cfg.response_noise;
  const double amp =
      damping * (0.1 + 0.9 * iou_value * iou_value) * std::exp(noise * normal(rng) - 0.5 * noise * noise);
  const double width = (1.5 + 5.0 * (1.0 - iou_value)) * std::exp(0.2 * normal(rng)) * r / 32.0;
  const double c0 = 0.5 * r + normal(rng), c1 = 0.5 * r + normal(rng);
  const double amp2 = (0.15 + 0.5 * (1.0 - iou_value)) * uniform(rng, 0, 1);
  const double d0 = uniform(rng, 0, r), d1 = uniform(rng, 0, r);
  const double width2 = 2.0 * r / 32.0;
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      const double a = ((i + 0.5 - c1) * (i + 0.5 - c1) + (j + 0.5 - c0) * (j + 0.5 - c0)) / (2 * width * width);
      const double b = ((i + 0.5 - d1) * (i + 0.5 - d1) + (j + 0.5 - d0) * (j + 0.5 - d0)) / (2 * width2 * width2);
      (*map)(i, j) = static_cast<float>(amp * std::exp(-a) + amp2 * std::exp(-b) + cfg.pixel_noise * normal(rng));
    }
  }
  return map;
}

BBox clamp_to_frame(BBox b, int width, int height) {
  const double cx = std::clamp(b.center_x(), 1.0, width - 1.0);
  const double cy = std::clamp(b.center_y(), 1.0, height - 1.0);
  b = BBox::from_center(cx, cy, b.width(), b.height());
  b.x_min = std::max(0.0, b.x_min);
  b.y_min = std::max(0.0, b.y_min);
  b.x_max = std::min<double>(width, b.x_max);
  b.y_max = std::min<double>(height, b.y_max);
  return b;
}

}  // namespace

SyntheticSequence generate_sequence(const SynthConfig& cfg, const std::string& video_id) {
  validate(cfg);
  SyntheticSequence seq;
  auto& data = seq.data;
  data.meta = VideoMeta{video_id, cfg.frame_count, cfg.width, cfg.height, cfg.anchor_interval};
  data.ground_truth = generate_track(cfg);
  for (int a : default_anchors(data.meta)) data.manual[a] = data.ground_truth[a];
  seq.occluded = generate_occlusions(cfg);
  seq.drifted[0].assign(cfg.frame_count, false);
  seq.drifted[1].assign(cfg.frame_count, false);

  const auto spans = split_video(data.meta, data.anchors());
  for (std::size_t si = 0; si < spans.size(); ++si) {
    const Span span = spans[si];
    for (Direction d : {Direction::kForward, Direction::kBackward}) {
      const int k = index_of(d);
      Rng rng = stream(cfg, 1000 + 2 * si + k);
      const int n = span.length();
      const bool drift = uniform(rng, 0, 1) < cfg.p_drift;
      const int onset = std::uniform_int_distribution<int>(1, std::max(1, n))(rng);
      const double angle = uniform(rng, 0, 2 * std::numbers::pi);
      ++seq.snippet_runs;
      if (drift) ++seq.drifted_snippets;
      double ax = 0, ay = 0, as = 0, wx = 0, wy = 0, offset = 0;
      for (int step = 1; step <= n; ++step) {
        const int f = d == Direction::kForward ? span.start + step : span.end - step;
        const double gain = seq.occluded[f] ? cfg.occlusion_gain : 1.0;
        ax = cfg.ar * ax + gain * cfg.sigma_pos * normal(rng);
        ay = cfg.ar * ay + gain * cfg.sigma_pos * normal(rng);
        as = cfg.ar * as + gain * cfg.sigma_scale * normal(rng);
        wx += cfg.walk_ratio * cfg.sigma_pos * normal(rng);
        wy += cfg.walk_ratio * cfg.sigma_pos * normal(rng);
        const bool drifting = drift && step >= onset;
        if (drifting) offset += cfg.drift_rate;
        seq.drifted[k][f] = drifting;
        const BBox& gt = data.ground_truth[f];
        const double ex = ax + wx + offset * std::cos(angle);
        const double ey = ay + wy + offset * std::sin(angle);
        const double sc = std::exp(as);
        BBox box = gt;
        if (ex != 0 || ey != 0 || sc != 1) {
          box = clamp_to_frame(BBox::from_center(gt.center_x() + ex * gt.width(), gt.center_y() + ey * gt.height(),
                                                 gt.width() * sc, gt.height() * sc),
                               cfg.width, cfg.height);
        }
        const double q = iou(box, gt);
        TrackedFrame tf;
        tf.frame_idx = f;
        tf.direction = d;
        tf.box = box;
        const double damping = seq.occluded[f] ? cfg.occlusion_damping : 1.0;
        tf.response = response_map(cfg, q, damping, rng);
        tf.confidence = std::clamp(damping * (0.1 + 0.85 * q) + cfg.confidence_noise * normal(rng), 0.0, 1.0);
        (d == Direction::kForward ? data.forward : data.backward).push_back(std::move(tf));
      }
    }
  }
  auto by_frame = [](const TrackedFrame& a, const TrackedFrame& b) { return a.frame_idx < b.frame_idx; };
  std::sort(data.forward.begin(), data.forward.end(), by_frame);
  std::sort(data.backward.begin(), data.backward.end(), by_frame);

  auto scene = std::make_shared<SyntheticScene>();
  scene->seed = mix_seed(cfg.seed, 3);
  scene->width = cfg.width;
  scene->height = cfg.height;
  scene->ground_truth = data.ground_truth;
  scene->mask_noise_density = cfg.mask_noise_density;
  scene->mask_noise_level = cfg.mask_noise_level;
  Rng rng = stream(cfg, 4);
  for (int i = 0; i < cfg.distractors; ++i) {
    Distractor dd;
    dd.radius = uniform(rng, cfg.distractor_radius_min, cfg.distractor_radius_max);
    dd.phase = uniform(rng, 0, 2 * std::numbers::pi);
    dd.speed = uniform(rng, -0.03, 0.03);
    dd.scale = uniform(rng, 0.35, 0.7);
    scene->distractors.push_back(dd);
  }
  seq.scene = std::move(scene);
  return seq;
}

std::optional<GridBox> brute_force_box_from_mask(const Mask& mask, double tau) {
  const int rows = static_cast<int>(mask.rows()), cols = static_cast<int>(mask.cols());
  int c0 = -1, c1 = -1, r0 = -1, r1 = -1;
  for (int j = 0; j < cols; ++j) {
    double s = 0;
    for (int i = 0; i < rows; ++i) s += mask(i, j);
    if (std::min(1.0, s) > tau) {
      if (c0 < 0) c0 = j;
      c1 = j;
    }
  }
  for (int i = 0; i < rows; ++i) {
    double s = 0;
    for (int j = 0; j < cols; ++j) s += mask(i, j);
    if (std::min(1.0, s) > tau) {
      if (r0 < 0) r0 = i;
      r1 = i;
    }
  }
  if (c0 < 0 || r0 < 0) return std::nullopt;
  return GridBox{c0, r0, c1, r1};
}

BruteForceMetrics brute_force_metrics(std::span<const double> ious, std::span<const Source> sources,
                                      std::span<const double> thresholds) {
  if (ious.size() != sources.size()) throw_invalid("IoU and source lists differ in length");
  BruteForceMetrics m;
  m.acc_at.assign(thresholds.size(), 0.0);
  double sum = 0;
  int below = 0;
  std::vector<int> above(thresholds.size(), 0);
  for (std::size_t i = 0; i < ious.size(); ++i) {
    if (sources[i] == Source::kManual || sources[i] == Source::kFailure) continue;
    ++m.evaluated;
    sum += ious[i];
    if (ious[i] < 0.5) ++below;
    for (std::size_t t = 0; t < thresholds.size(); ++t) above[t] += ious[i] > thresholds[t] ? 1 : 0;
  }
  if (m.evaluated == 0) return m;
  m.miou = sum / m.evaluated;
  m.err_rate = static_cast<double>(below) / m.evaluated;
  for (std::size_t t = 0; t < thresholds.size(); ++t) m.acc_at[t] = static_cast<double>(above[t]) / m.evaluated;
  return m;
}

void write_drift_labels(const SyntheticSequence& seq, const std::filesystem::path& path) {
  std::string out;
  for (int f = 0; f < seq.data.meta.frame_count; ++f) {
    out += std::to_string(f) + ',' + (seq.drifted[0][f] ? '1' : '0') + ',' + (seq.drifted[1][f] ? '1' : '0') + ',' +
           (seq.occluded[f] ? '1' : '0') + '\n';
  }
  write_text_file(path, out);
}

}  // namespace vidanno
