// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "box_inference.hpp"
#include "quality_metrics.hpp"
#include "sequence_model.hpp"
#include "synth_oracle.hpp"
#include "training.hpp"
#include "vg_refine.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vidanno {

struct NetConfig {
  int features = 64;
  int hidden = 128;
  int layers = 3;
  nn::SequenceKind kind = nn::SequenceKind::kLstm;
  std::vector<int> conv_channels{8, 16, 32};
};

/// Every setting of a run. Text form: `section.key = value` lines, `#`
/// comments, unknown keys rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 0;  // 0: one per hardware thread

  std::string data_dir = "data";
  std::string checkpoint_dir = "checkpoints";
  std::string output_dir = "output";

  int anchor_interval = 30;
  int window_length = 20;
  int window_stride = 10;
  int map_size = 32;
  bool map_resize = false;

  NetConfig assess;
  QualityMapParams quality;
  TrainConfig train;

  NetConfig refine_net;
  TrainConfig refine_train;
  Aggregation aggregation = Aggregation::kRectified;
  std::string mask_predictor = "oracle";  // oracle | conv
  int mask_rows = 64;
  int mask_cols = 64;
  RefineMode refine_mode = RefineMode::kVisualGeometric;
  int mask_channels = 8;
  TrainConfig mask_train;
  int mask_item_stride = 10;

  InferenceConfig inference;

  double train_fraction = 0.5;
  double validation_fraction = 0.2;  // of the training part
  std::vector<std::string> annotate_sequences;  // empty: the test split

  std::vector<double> acc_thresholds{0.5, 0.7};
  std::string eval_annotations;   // evaluate this file instead of the annotate outputs
  std::string eval_ground_truth;

  int synth_count = 50;
  SynthConfig synth;

  RunConfig();

  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  static const std::vector<std::string>& keys();

  /// Parses the text form on top of the current values.
  void load_text(std::string_view text, const std::string& origin = "config");
  void load_file(const std::filesystem::path& path);
  /// `key=value`, split at the first '='.
  void apply_override(std::string_view assignment);
  std::string to_text() const;

  void validate() const;

  ModelConfig assess_model() const;
  ModelConfig refine_model() const;
  AnnotateConfig annotate_config() const;
  RefineTrainConfig refine_train_config() const;
  DumpReadOptions dump_options() const { return DumpReadOptions{map_size, map_resize}; }

  std::filesystem::path data_path() const;
  std::filesystem::path checkpoint_path() const;
  std::filesystem::path output_path() const;
};

/// Resolves relative paths against $VIDANNO_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output_path(const std::string& path);

}  // namespace vidanno
