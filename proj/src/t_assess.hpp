// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "quality_metrics.hpp"
#include "sequence_model.hpp"
#include "snippet_pipeline.hpp"
#include "training.hpp"

#include <span>
#include <vector>

namespace vidanno {

/// Per-frame quality regressor: one scalar per window slot.
class AssessModel {
 public:
  AssessModel() : AssessModel(ModelConfig{}) {}
  explicit AssessModel(ModelConfig cfg);

  const ModelConfig& config() const { return net_.config(); }
  DirectionalModel& net() { return net_; }
  const DirectionalModel& net() const { return net_; }

  /// The c+5 frame feature: extractor output, then normalized box corners and confidence.
  std::vector<double> extract_feature(const TrackedFrame& frame, const VideoMeta& meta) const;

  /// One score per slot, padded slots included.
  std::vector<double> predict_scores(const Window& window, const VideoMeta& meta) const;
  /// Same-direction batch; result[b][t] is slot t of item b.
  std::vector<std::vector<double>> predict_scores(std::span<const BatchItem> items) const;

 private:
  DirectionalModel net_;
};

/// sum over valid slots of (g - target)^2. When `grad` is non-null it receives
/// dL/dg (zero on invalid slots).
double loss_conf(std::span<const double> pred, std::span<const double> target,
                 const std::vector<bool>& valid, std::vector<double>* grad = nullptr);

/// Per-window form: pred[w], target[w], valid[w] must agree in length.
double loss_conf(std::span<const std::vector<double>> pred, std::span<const std::vector<double>> target,
                 std::span<const std::vector<bool>> valid);

struct AssessSample {
  Window window;
  std::vector<double> targets;  // per slot; 0 on padded slots
  int frame_width = 1;
  int frame_height = 1;
};

/// Windows of every snippet in both directions with quality targets derived
/// from ground truth. Requires dense ground truth.
std::vector<AssessSample> make_assess_samples(const SequenceData& data, int length, int stride,
                                              const QualityMapParams& quality);

/// Mean per-valid-slot L_conf over `samples`; NaN when empty.
double mean_loss_conf(const AssessModel& model, std::span<const AssessSample> samples);

/// Trains in place. The validation loss is the per-valid-slot mean of L_conf.
TrainResult train_assess(AssessModel& model, std::span<const AssessSample> train,
                         std::span<const AssessSample> validation, const TrainConfig& cfg);

}  // namespace vidanno
