// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "frame_source.hpp"
#include "nn.hpp"
#include "scene.hpp"
#include "training.hpp"
#include "vg_refine.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>

namespace vidanno {

/// What a mask predictor may look at for one video.
struct VideoContext {
  VideoMeta meta;
  std::map<int, BBox> manual;                      // template boxes
  std::shared_ptr<const FrameSource> frames;       // may be null for the oracle
  std::shared_ptr<const SyntheticScene> scene;     // synthetic videos only
};

struct MaskQuery {
  const VideoContext& video;
  int frame_idx;
  Direction direction;
  const SearchRegion& region;
};

/// Initial (unweighted) target segmentation inside a search region.
class MaskPredictor {
 public:
  virtual ~MaskPredictor() = default;
  /// region.rows x region.cols, entries in [0,1].
  virtual Mask predict(const MaskQuery& query) const = 0;
  virtual std::string name() const = 0;
};

/// Segments the true target of a synthetic scene, plus the scene's
/// distractors and sparse noise, as a visual model confused by look-alikes
/// would.
class OracleMaskPredictor : public MaskPredictor {
 public:
  Mask predict(const MaskQuery& query) const override;
  std::string name() const override { return "oracle"; }
};

/// Template frame used for a query: the anchor the tracker started from.
int template_frame(const VideoContext& video, int frame_idx, Direction direction);

/// Small fully convolutional net over the search crop and the template crop,
/// both resampled to the mask grid, with a sigmoid output.
class ConvMaskPredictor : public MaskPredictor {
 public:
  explicit ConvMaskPredictor(int channels = 8, std::uint64_t seed = 1);

  Mask predict(const MaskQuery& query) const override;
  std::string name() const override { return "conv"; }

  /// Input planes (2, rows*cols) for a query.
  nn::Matrix input(const MaskQuery& query) const;
  /// Logits (1, rows*cols); `caches` receives per-layer caches when non-null.
  nn::Matrix logits(const nn::Matrix& input, int rows, int cols, std::vector<nn::Conv2d::Cache>* caches) const;
  void backward(const nn::Matrix& d_logits, const std::vector<nn::Conv2d::Cache>& caches);

  nn::ParameterRefs parameters();
  int channels() const { return channels_; }

  void save(const std::filesystem::path& path);
  static ConvMaskPredictor load(const std::filesystem::path& path);

 private:
  int channels_;
  std::vector<nn::Conv2d> layers_;
};

struct MaskTrainItem {
  const VideoContext* video = nullptr;
  int frame_idx = 0;
  Direction direction = Direction::kForward;
  BBox tracker_box;
  BBox ground_truth;
};

/// Box-supervised training: the profile loss between the predicted mask and
/// the ground-truth box mask, with no geometric weighting.
TrainResult train_mask_predictor(ConvMaskPredictor& model, std::span<const MaskTrainItem> train,
                                 std::span<const MaskTrainItem> validation, const TrainConfig& cfg,
                                 Aggregation aggregation, int rows, int cols);

/// Valid slots of refine samples, every `stride`-th one.
std::vector<MaskTrainItem> mask_items_from(std::span<const RefineSample> samples, int stride);

}  // namespace vidanno
