// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "dataset.hpp"

#include "common.hpp"

#include <algorithm>

namespace vidanno {

namespace fs = std::filesystem;

void write_sequence(const SyntheticSequence& seq, const fs::path& dir) {
  const auto& d = seq.data;
  fs::create_directories(dir);
  write_video_meta(d.meta, dir / "video.txt");
  std::vector<AnnotationRecord> anchors, gt;
  for (const auto& [f, box] : d.manual) anchors.push_back({f, Source::kManual, box, std::nullopt});
  for (int f = 0; f < d.meta.frame_count; ++f) gt.push_back({f, Source::kManual, d.ground_truth[f], std::nullopt});
  write_annotations(anchors, d.meta, dir / "anchors.ann");
  write_annotations(gt, d.meta, dir / "gt.ann");
  write_tracker_dump(dir / "forward", Direction::kForward, d.forward);
  write_tracker_dump(dir / "backward", Direction::kBackward, d.backward);
  if (seq.scene) write_scene(*seq.scene, dir / "scene.txt");
  write_drift_labels(seq, dir / "drift.txt");
}

std::vector<BBox> read_ground_truth(const fs::path& path, const VideoMeta& meta) {
  const AnnotationFile file = read_annotations(path);
  if (file.meta.frame_count != meta.frame_count) {
    throw_format(path.string() + ": ground truth covers " + std::to_string(file.meta.frame_count) +
                 " frames, video has " + std::to_string(meta.frame_count));
  }
  validate_finished(file.records, meta);
  std::vector<BBox> boxes;
  boxes.reserve(file.records.size());
  for (const auto& r : file.records) {
    if (!r.box) throw_format(path.string() + ": frame " + std::to_string(r.frame_idx) + " has no box");
    boxes.push_back(*r.box);
  }
  return boxes;
}

LoadedSequence read_sequence(const fs::path& dir, const DumpReadOptions& dump, bool require_gt) {
  if (!fs::is_directory(dir)) throw_not_found("sequence directory not found: " + dir.string());
  LoadedSequence s;
  s.name = dir.filename().string();
  auto& d = s.data;
  d.meta = read_video_meta(dir / "video.txt");
  const AnnotationFile anchors = read_annotations(dir / "anchors.ann");
  for (const auto& r : anchors.records) {
    if (r.source != Source::kManual || !r.box) {
      throw_format((dir / "anchors.ann").string() + ": frame " + std::to_string(r.frame_idx) + " is not a manual box");
    }
    d.manual[r.frame_idx] = *r.box;
  }
  if (fs::exists(dir / "gt.ann")) {
    d.ground_truth = read_ground_truth(dir / "gt.ann", d.meta);
  } else if (require_gt) {
    throw_not_found("ground truth not found: " + (dir / "gt.ann").string());
  }
  d.forward = read_tracker_dump(dir / "forward", Direction::kForward, dump);
  d.backward = read_tracker_dump(dir / "backward", Direction::kBackward, dump);
  if (fs::exists(dir / "scene.txt")) {
    auto scene = std::make_shared<SyntheticScene>(read_scene(dir / "scene.txt"));
    if (!d.has_ground_truth()) throw_format(dir.string() + ": a synthetic scene needs gt.ann");
    scene->ground_truth = d.ground_truth;
    s.scene = scene;
  }
  if (fs::is_directory(dir / "frames")) {
    s.frames = std::make_shared<ImageDirSource>(dir / "frames");
  } else if (s.scene) {
    s.frames = std::make_shared<SyntheticFrameSource>(s.scene);
  }
  return s;
}

std::vector<std::string> list_sequences(const fs::path& data_dir) {
  if (!fs::is_directory(data_dir)) throw_not_found("data directory not found: " + data_dir.string());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(data_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "video.txt")) names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace vidanno
