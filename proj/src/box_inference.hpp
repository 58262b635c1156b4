// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "annotation_store.hpp"
#include "mask_predictor.hpp"
#include "quality_metrics.hpp"
#include "snippet_pipeline.hpp"
#include "t_assess.hpp"
#include "vg_refine.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vidanno {

struct InferenceConfig {
  double tau = 0.5;
  double failure_threshold = 0.0;
  // Ties always go to the forward result.
};

void validate(const InferenceConfig& cfg);

/// Inclusive grid-index extent of a mask's above-tau rows and columns.
struct GridBox {
  int col_min = 0, row_min = 0, col_max = 0, row_max = 0;
  friend bool operator==(const GridBox&, const GridBox&) = default;
};

/// Columns with s^v > tau and rows with s^h > tau under rectified
/// accumulation; absent when either set is empty.
std::optional<GridBox> mask_box_indices(const Mask& mask, double tau);

/// Grid extent mapped to frame pixels through the region's cell edges and
/// clamped to the frame.
std::optional<BBox> refine_box(const Mask& mask, const SearchRegion& region, const InferenceConfig& cfg);

AnnotationRecord select_and_flag(int frame_idx, double g_forward, double g_backward,
                                 const std::optional<BBox>& refined_forward,
                                 const std::optional<BBox>& refined_backward, const BBox& fallback_forward,
                                 const BBox& fallback_backward, const InferenceConfig& cfg);

enum class RefineMode { kNone, kVisual, kVisualGeometric };

const char* to_string(RefineMode m);
RefineMode parse_refine_mode(const std::string& s);

struct AnnotateConfig {
  int window_length = 20;
  int stride = 10;
  InferenceConfig inference;
  RefineMode refine = RefineMode::kVisualGeometric;
  int rows = 64;
  int cols = 64;
};

/// Everything decided about one non-anchor frame, indexed by direction.
struct FrameDiagnostics {
  int frame_idx = 0;
  std::array<double, 2> score{};
  std::array<BBox, 2> tracker{};
  std::array<std::optional<BBox>, 2> visual{};     // unweighted mask
  std::array<std::optional<BBox>, 2> geometric{};  // Gaussian-weighted mask
  std::array<GaussianParams, 2> theta{};
};

struct AnnotationResult {
  std::vector<AnnotationRecord> records;  // one per frame
  std::vector<FrameDiagnostics> frames;   // non-anchor frames, ascending
  std::vector<int> failures;
};

/// `geometry`, `masks` and `video` may be null when the refine mode does not
/// need them.
AnnotationResult annotate_video(const SequenceData& data, const AssessModel& assess, const GeometryModel* geometry,
                                const MaskPredictor* masks, const VideoContext* video, const AnnotateConfig& cfg);

/// Rows of the comparison table: single-direction tracking, score selection
/// with and without failure flagging, and the two refinement variants.
enum class Variant { kForward, kBackward, kSelect, kSelectFail, kVisualRefine, kGeometricRefine };

inline constexpr std::array<Variant, 6> kAllVariants{Variant::kForward,    Variant::kBackward,
                                                     Variant::kSelect,     Variant::kSelectFail,
                                                     Variant::kVisualRefine, Variant::kGeometricRefine};

const char* to_string(Variant v);

/// Records the pipeline would have produced under `variant`. Variants that do
/// not flag failures carry the chosen direction's raw score as quality.
std::vector<AnnotationRecord> variant_records(const AnnotationResult& result, const std::map<int, BBox>& manual,
                                              Variant variant, const InferenceConfig& cfg);

/// Per-frame diagnostics as CSV: frame, then score/tracker/refined boxes per direction.
void write_diagnostics(std::span<const FrameDiagnostics> frames, const std::filesystem::path& path);
std::vector<FrameDiagnostics> read_diagnostics(const std::filesystem::path& path);

}  // namespace vidanno
