// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "annotation_store.hpp"
#include "box_inference.hpp"
#include "quality_metrics.hpp"
#include "scene.hpp"
#include "snippet_pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace vidanno {

struct SynthConfig {
  std::uint64_t seed = 1;
  int frame_count = 900;
  int width = 640;
  int height = 360;
  int anchor_interval = 30;
  int map_size = 32;

  // Target motion: accelerations are per-frame Gaussian, speed is capped.
  double min_size = 40.0;
  double max_size = 100.0;
  double max_speed = 3.0;    // px / frame
  double accel_sigma = 0.4;  // px / frame^2
  double scale_sigma = 0.004;

  // Tracker error, in target-box units, evolving from zero at the start anchor.
  double sigma_pos = 0.03;    // AR(1) innovation
  double sigma_scale = 0.02;
  double ar = 0.9;
  double walk_ratio = 0.35;   // non-decaying random-walk share of sigma_pos
  double p_drift = 0.05;      // per snippet and direction
  double drift_rate = 0.06;   // box widths per frame once drifting
  double occlusion_rate = 0.004;  // per-frame onset probability
  int occlusion_min = 6;
  int occlusion_max = 18;
  double occlusion_gain = 12.0;   // jitter multiplier while occluded

  // Response maps: a bump whose amplitude and sharpness follow IoU, observed
  // through heavy per-frame noise.
  double response_noise = 0.45;  // log-normal amplitude noise
  double pixel_noise = 0.08;
  double confidence_noise = 0.25;
  double occlusion_damping = 0.3;  // response amplitude factor while occluded

  int distractors = 2;
  double distractor_radius_min = 1.3;  // orbit radius, target-box units
  double distractor_radius_max = 2.2;
  double mask_noise_density = 0.01;
  double mask_noise_level = 0.2;
};

void validate(const SynthConfig& cfg);

struct SyntheticSequence {
  SequenceData data;
  std::shared_ptr<const SyntheticScene> scene;
  std::array<std::vector<bool>, 2> drifted;  // per direction, per frame
  std::vector<bool> occluded;
  int drifted_snippets = 0;  // over both directions
  int snippet_runs = 0;      // spans x 2
};

/// Pure function of `cfg`; `video_id` names the sequence.
SyntheticSequence generate_sequence(const SynthConfig& cfg, const std::string& video_id = "synth");

/// Direct double loop over the grid: min/max above-tau row and column indices.
std::optional<GridBox> brute_force_box_from_mask(const Mask& mask, double tau);

struct BruteForceMetrics {
  double miou = 0.0;
  std::vector<double> acc_at;  // aligned with the thresholds passed in
  double err_rate = 0.0;
  int evaluated = 0;
};

/// Scalar recomputation over raw per-frame IoUs; frames whose source is MANUAL
/// or FAILURE are skipped.
BruteForceMetrics brute_force_metrics(std::span<const double> ious, std::span<const Source> sources,
                                      std::span<const double> thresholds);

/// Drift labels: `frame,fwd_drift,bwd_drift,occluded` per line.
void write_drift_labels(const SyntheticSequence& seq, const std::filesystem::path& path);

}  // namespace vidanno
