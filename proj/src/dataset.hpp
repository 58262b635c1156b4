// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sequence directory layout:
//   video.txt     VideoMeta
//   anchors.ann   manual boxes (annotation file, MANUAL records only)
//   gt.ann        dense ground truth, when known
//   forward/      tracker dump, forward direction
//   backward/     tracker dump, backward direction
//   frames/       000000.pgm ... (optional)
//   scene.txt     synthetic scene (synthetic sequences only)
//   drift.txt     synthetic drift labels

#pragma once

#include "annotation_store.hpp"
#include "frame_source.hpp"
#include "mask_predictor.hpp"
#include "scene.hpp"
#include "snippet_pipeline.hpp"
#include "synth_oracle.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace vidanno {

struct LoadedSequence {
  std::string name;
  SequenceData data;
  std::shared_ptr<const SyntheticScene> scene;
  std::shared_ptr<const FrameSource> frames;

  VideoContext context() const { return VideoContext{data.meta, data.manual, frames, scene}; }
};

void write_sequence(const SyntheticSequence& seq, const std::filesystem::path& dir);

/// Loads a sequence directory. Ground truth is optional unless `require_gt`.
LoadedSequence read_sequence(const std::filesystem::path& dir, const DumpReadOptions& dump, bool require_gt);

/// Sorted names of subdirectories holding a video.txt.
std::vector<std::string> list_sequences(const std::filesystem::path& data_dir);

/// Ground-truth boxes from an annotation file whose records all carry boxes.
std::vector<BBox> read_ground_truth(const std::filesystem::path& path, const VideoMeta& meta);

}  // namespace vidanno
