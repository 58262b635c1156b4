// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "annotation_store.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace vidanno {

/// Frames [start, end] bounded by two manual anchors; adjacent spans share anchors.
struct Span {
  int start = 0;
  int end = 0;
  int length() const { return end - start; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct Snippet {
  Span span;
  std::vector<TrackedFrame> frames_fwd;  // (start, end], ascending
  std::vector<TrackedFrame> frames_bwd;  // [start, end), descending (tracking order)
};

/// Default anchor schedule: every `anchor_interval` frames plus the last frame.
std::vector<int> default_anchors(const VideoMeta& meta);

std::vector<Span> split_video(const VideoMeta& meta, std::vector<int> manual_frames);

/// Cuts whole-video dumps into per-span snippets in tracking order.
std::vector<Snippet> assemble_snippets(std::span<const Span> spans,
                                       std::span<const TrackedFrame> forward,
                                       std::span<const TrackedFrame> backward);

struct FramePair {
  TrackedFrame forward;
  TrackedFrame backward;
};

struct MergedVideo {
  std::map<int, FramePair> pairs;  // non-anchor frames
  std::map<int, BBox> anchors;     // manual boxes
};

MergedVideo merge_directions(std::span<const Snippet> snippets, const std::map<int, BBox>& manual_boxes);

/// Fixed-length model input. Padded slots repeat the last real frame and are invalid.
struct Window {
  int length = 0;
  Direction direction = Direction::kForward;
  int offset = 0;
  std::vector<TrackedFrame> frames;
  std::vector<bool> valid_mask;

  int valid_count() const;
};

std::vector<Window> make_windows(std::span<const TrackedFrame> span_frames, int length, int stride);

/// Per-frame mean over all valid slots covering the frame. Contributions are
/// summed in (window offset, slot) order so the result does not depend on
/// the order of `windows`.
std::map<int, double> scatter_window_outputs(std::span<const Window> windows,
                                            std::span<const std::vector<double>> values);

/// Windows of one span in one direction.
struct SpanWindows {
  int span_id = 0;
  Span span;
  Direction direction = Direction::kForward;
  std::vector<Window> windows;
};

/// Both directions of every snippet, span-major then forward before backward.
std::vector<SpanWindows> window_snippets(std::span<const Snippet> snippets, int length, int stride);

/// Per-video inputs: whole-video dumps, manual boxes at anchors and, for
/// training or evaluation, dense ground truth.
struct SequenceData {
  VideoMeta meta;
  std::map<int, BBox> manual;
  std::vector<BBox> ground_truth;  // empty when unknown
  std::vector<TrackedFrame> forward;
  std::vector<TrackedFrame> backward;

  std::vector<int> anchors() const;
  bool has_ground_truth() const { return static_cast<int>(ground_truth.size()) == meta.frame_count; }
};

std::vector<Snippet> snippets_of(const SequenceData& data);

/// Window index file: one line per window, `window_id,span_start,span_end,offset,direction,valid`.
struct WindowIndexEntry {
  int window_id = 0;
  Span span;
  int offset = 0;
  Direction direction = Direction::kForward;
  int valid = 0;
  friend bool operator==(const WindowIndexEntry&, const WindowIndexEntry&) = default;
};

inline constexpr std::string_view kWindowIndexMagic = "VIDANNO-WIN/1";

struct WindowIndex {
  std::string video_id;
  int length = 20;
  int stride = 10;
  std::vector<WindowIndexEntry> entries;
};

void write_window_index(const WindowIndex& index, const std::filesystem::path& path);
WindowIndex read_window_index(const std::filesystem::path& path);

}  // namespace vidanno
