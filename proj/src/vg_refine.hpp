// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "annotation_store.hpp"
#include "frame_source.hpp"
#include "sequence_model.hpp"
#include "snippet_pipeline.hpp"
#include "training.hpp"

#include <Eigen/Core>

#include <array>
#include <span>
#include <vector>

namespace vidanno {

class MaskPredictor;
struct VideoContext;

/// P rows (y) by Q columns (x).
using Mask = Eigen::MatrixXd;

/// Box-centered region of twice the box size, mapped onto a P x Q grid. The
/// grid always spans the full (unclipped) region so the transform stays
/// affine and invertible; `clip` records the part that lies inside the frame.
struct SearchRegion {
  BBox source_box;
  double center_x = 0, center_y = 0;
  double width = 0, height = 0;
  int rows = 64;  // P
  int cols = 64;  // Q
  BBox clip;
  bool clipped = false;

  double x0() const { return center_x - width / 2; }
  double y0() const { return center_y - height / 2; }
  double cell_width() const { return width / cols; }
  double cell_height() const { return height / rows; }

  /// Continuous grid coordinates: column u in [0, Q], row v in [0, P].
  double col_to_x(double u) const { return x0() + u * cell_width(); }
  double row_to_y(double v) const { return y0() + v * cell_height(); }
  double x_to_col(double x) const { return (x - x0()) / cell_width(); }
  double y_to_row(double y) const { return (y - y0()) / cell_height(); }
};

SearchRegion make_search_region(const BBox& box, int frame_width, int frame_height, int rows = 64, int cols = 64);

struct RegionCrop {
  SearchRegion region;
  Image image;  // crop_size x crop_size; pixels outside the frame are 0
};

RegionCrop crop_search_region(const FrameSource& frames, int frame_idx, const BBox& box, const VideoMeta& meta,
                              int rows = 64, int cols = 64, int crop_size = 128);

struct GaussianParams {
  double mu1 = 0.5;
  double mu2 = 0.5;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double alpha = 0.0;
  friend bool operator==(const GaussianParams&, const GaussianParams&) = default;
};

void validate(const GaussianParams& theta);

/// exp(-alpha((x-mu1)^2/sigma1^2 + (y-mu2)^2/sigma2^2)) at normalized (x, y).
double gaussian_weight(const GaussianParams& theta, double x, double y);

/// The weight evaluated at cell centers ((j+0.5)/Q, (i+0.5)/P).
Mask gaussian_weight_map(const GaussianParams& theta, int rows, int cols);

Mask apply_weight(const Mask& initial, const Mask& weight);

/// horizontal: one value per row (length P); vertical: one per column (length Q).
enum class Axis { kHorizontal, kVertical };

enum class Aggregation {
  kRectified,     // min(1, sum)
  kRectifiedMax,  // max(1, sum), the formula as printed; for comparison runs only
  kMaxPool,
  kAverage,
  kSum,
};

const char* to_string(Aggregation a);
Aggregation parse_aggregation(const std::string& s);

Eigen::VectorXd aggregate(const Mask& mask, Axis axis, Aggregation op);

/// d(loss)/d(mask) given d(loss)/d(profile).
Mask aggregate_backward(const Mask& mask, Axis axis, Aggregation op, const Eigen::VectorXd& d_profile);

/// Cells whose centers fall inside `box`.
Mask box_mask(const SearchRegion& region, const BBox& box);

/// ||s^v - m^v||^2 + ||s^h - m^h||^2 for one mask pair; `d_pred` receives
/// d/dS when non-null.
double profile_loss(const Mask& pred, const Mask& target, Aggregation op, Mask* d_pred = nullptr);

/// Sum of profile_loss over aligned pairs with valid[i] true.
double loss_reg(std::span<const Mask> pred, std::span<const Mask> target, const std::vector<bool>& valid,
                Aggregation op = Aggregation::kRectified);

using ThetaGrad = std::array<double, 5>;  // mu1, mu2, sigma1, sigma2, alpha

/// Loss of S = initial * W(theta) against `target` and its gradient in theta.
double weighted_profile_loss(const Mask& initial, const GaussianParams& theta, const Mask& target,
                             Aggregation op, ThetaGrad* d_theta);

/// Raw head outputs -> theta: mu = sigmoid(r), sigma = 1e-3 + exp(r), alpha = exp(r).
GaussianParams theta_from_raw(std::span<const double> raw);
/// Chain rule through theta_from_raw.
std::array<double, 5> raw_gradient(std::span<const double> raw, const ThetaGrad& d_theta);

/// The geometric module: same layout as the assessment model with five raw
/// outputs per slot.
class GeometryModel {
 public:
  GeometryModel() : GeometryModel(ModelConfig{}) {}
  explicit GeometryModel(ModelConfig cfg);

  const ModelConfig& config() const { return net_.config(); }
  DirectionalModel& net() { return net_; }
  const DirectionalModel& net() const { return net_; }

  std::vector<GaussianParams> predict_geometry(const Window& window, const VideoMeta& meta) const;
  std::vector<std::vector<GaussianParams>> predict_geometry(std::span<const BatchItem> items) const;

 private:
  DirectionalModel net_;
};

struct RefineSample {
  Window window;
  const VideoContext* video = nullptr;
  std::vector<BBox> ground_truth;  // per slot
};

struct RefineTrainConfig {
  TrainConfig train;
  Aggregation aggregation = Aggregation::kRectified;
  int rows = 64;
  int cols = 64;
};

/// Windows of every snippet in both directions, paired with per-slot ground truth.
std::vector<RefineSample> make_refine_samples(const SequenceData& data, const VideoContext* video, int length,
                                              int stride);

/// Mean per-valid-slot weighted profile loss; NaN when empty.
double mean_loss_reg(const GeometryModel& model, std::span<const RefineSample> samples,
                     const MaskPredictor& predictor, const RefineTrainConfig& cfg);

TrainResult train_refine(GeometryModel& model, std::span<const RefineSample> train,
                         std::span<const RefineSample> validation, const MaskPredictor& predictor,
                         const RefineTrainConfig& cfg);

}  // namespace vidanno
