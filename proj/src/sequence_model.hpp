// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "annotation_store.hpp"
#include "nn.hpp"
#include "snippet_pipeline.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace vidanno {

struct ModelConfig {
  int map_size = 32;                        // r
  std::vector<int> conv_channels{8, 16, 32};  // one stride-2 3x3 stage each
  int features = 64;                        // c
  int hidden = 128;
  int layers = 3;
  nn::SequenceKind kind = nn::SequenceKind::kLstm;
  int outputs = 1;
  int window_length = 20;  // L
  std::uint64_t seed = 1;

  int frame_feature_size() const { return features + 5; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Frames of B same-direction windows laid out time-major: column t*B + b is
/// slot t of window b.
struct FrameBatch {
  int steps = 0;
  int batch = 0;
  int map_size = 0;
  nn::Matrix maps;  // (1, steps*batch*r*r)
  nn::Matrix tail;  // (5, steps*batch): normalized box corners and confidence
  std::vector<bool> valid;

  int frames() const { return steps * batch; }
};

/// A window plus the frame size used to normalize its boxes.
struct BatchItem {
  const Window* window = nullptr;
  int frame_width = 1;
  int frame_height = 1;
};

FrameBatch make_frame_batch(std::span<const BatchItem> items, int map_size);
FrameBatch make_frame_batch(std::span<const Window> windows, const VideoMeta& meta, int map_size);

/// Response map -> c features: stride-2 conv stages, global mean, linear projection.
class FeatureExtractor {
 public:
  struct Cache {
    std::vector<nn::Conv2d::Cache> conv;
    std::vector<int> sizes;
    nn::Matrix pooled;
  };

  FeatureExtractor() = default;
  explicit FeatureExtractor(const ModelConfig& cfg);

  nn::Matrix forward(const nn::Matrix& maps, int frames, Cache* cache) const;
  void backward(const nn::Matrix& d_features, const Cache& cache);

  void init(std::mt19937_64& rng);
  nn::ParameterRefs parameters();

 private:
  int map_size_ = 32;
  std::vector<nn::Conv2d> convs_;
  nn::Linear projection_;
};

/// Stacked sequence layers followed by a per-step linear head.
class SequencePredictor {
 public:
  struct Cache {
    std::vector<nn::SequenceLayer::Cache> layers;
    nn::Matrix top;
  };

  SequencePredictor() = default;
  SequencePredictor(const ModelConfig& cfg, const std::string& prefix);

  nn::Matrix forward(const nn::Matrix& x, int steps, int batch, Cache* cache) const;
  nn::Matrix backward(const nn::Matrix& d_out, const Cache& cache);

  void init(std::mt19937_64& rng);
  nn::ParameterRefs parameters();
  nn::ParameterRefs head_parameters() { return head_.parameters(); }
  nn::Linear& head() { return head_; }

 private:
  std::vector<nn::SequenceLayer> layers_;
  nn::Linear head_;
};

/// Shared extractor with one sequential predictor per tracking direction.
class DirectionalModel {
 public:
  struct Cache {
    FeatureExtractor::Cache extractor;
    SequencePredictor::Cache predictor;
    nn::Matrix inputs;
    int steps = 0, batch = 0;
  };

  DirectionalModel() = default;
  explicit DirectionalModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  /// Frame features (c+5, frames).
  nn::Matrix features(const FrameBatch& batch, FeatureExtractor::Cache* cache) const;

  /// Raw outputs (outputs, steps*batch) from the predictor of `direction`.
  nn::Matrix forward(const FrameBatch& batch, Direction direction, Cache* cache) const;
  void backward(const nn::Matrix& d_out, Direction direction, const Cache& cache);

  nn::ParameterRefs parameters();
  nn::ParameterRefs extractor_parameters() { return extractor_.parameters(); }
  nn::ParameterRefs predictor_parameters(Direction d) { return predictors_[index_of(d)].parameters(); }
  SequencePredictor& predictor(Direction d) { return predictors_[index_of(d)]; }
  void zero_grad() { nn::zero_grads(parameters()); }

 private:
  ModelConfig cfg_;
  FeatureExtractor extractor_;
  std::array<SequencePredictor, 2> predictors_;
};

/// Checkpoint: text magic line, one-line JSON manifest (kind, model config,
/// parameter names/shapes, extra metadata), then little-endian float64
/// parameter values in manifest order.
inline constexpr std::string_view kCheckpointMagic = "VIDANNO-CKPT/1";

struct CheckpointInfo {
  std::string kind;
  ModelConfig config;
  std::string metadata_json = "{}";
};

void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info,
                     const nn::ParameterRefs& params);

/// Reads the manifest only.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Loads values into `params`; names and shapes must match the manifest.
void load_checkpoint_values(const std::filesystem::path& path, const nn::ParameterRefs& params);

std::string model_config_json(const ModelConfig& cfg);

}  // namespace vidanno
