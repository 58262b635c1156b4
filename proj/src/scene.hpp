// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analytic synthetic scene: one target following the ground-truth track plus
// look-alike distractors orbiting it. Rendering and the oracle mask are pure
// functions of (scene, frame, position), so nothing is ever rasterized at
// full-frame size.

#pragma once

#include "annotation_store.hpp"
#include "frame_source.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace vidanno {

/// Orbit expressed in target-box units: center = target center +
/// radius * (w cos phi, h sin phi), phi = phase + speed * frame.
struct Distractor {
  double radius = 1.0;
  double phase = 0.0;
  double speed = 0.0;
  double scale = 0.5;
  friend bool operator==(const Distractor&, const Distractor&) = default;
};

struct SyntheticScene {
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  std::vector<BBox> ground_truth;
  std::vector<Distractor> distractors;
  double mask_noise_density = 0.01;
  double mask_noise_level = 0.2;
  double distractor_level = 0.9;

  BBox distractor_box(std::size_t k, int frame) const;
  /// Oracle segmentation value at a frame-pixel point: 1 inside the target
  /// ellipse, distractor_level inside a distractor, sparse noise elsewhere.
  /// `salt` decorrelates the noise between queries of the same frame.
  double mask_value(int frame, double x, double y, std::uint64_t salt) const;
  /// Rendered intensity in [0,1].
  float intensity(int frame, double x, double y) const;

  friend bool operator==(const SyntheticScene&, const SyntheticScene&) = default;
};

bool inside_ellipse(const BBox& box, double x, double y);

/// Hash of integer coordinates to [0,1).
double hash_unit(std::uint64_t seed, std::int64_t a, std::int64_t b, std::int64_t c);

class SyntheticFrameSource : public FrameSource {
 public:
  explicit SyntheticFrameSource(std::shared_ptr<const SyntheticScene> scene) : scene_(std::move(scene)) {}
  int width() const override { return scene_->width; }
  int height() const override { return scene_->height; }
  int frame_count() const override { return static_cast<int>(scene_->ground_truth.size()); }
  Image crop(int frame, double x0, double y0, double x1, double y1, int size) const override;

 private:
  std::shared_ptr<const SyntheticScene> scene_;
};

/// Scene file: `VIDANNO-SCENE/1` header, key=value parameters, one
/// `distractor=radius,phase,speed,scale` line each. Ground truth is stored
/// separately (annotation file) and attached by the caller.
void write_scene(const SyntheticScene& scene, const std::filesystem::path& path);
SyntheticScene read_scene(const std::filesystem::path& path);

}  // namespace vidanno
