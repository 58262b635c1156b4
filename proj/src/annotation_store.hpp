// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vidanno {

/// Axis-aligned target extent in frame pixels.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 1.0;
  double y_max = 1.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  /// Finite corners with x_min < x_max and y_min < y_max.
  bool valid() const;
  static BBox from_center(double cx, double cy, double w, double h);

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Throws kInvalidArgument naming `what` when the box violates its invariants.
void require_valid(const BBox& box, std::string_view what);

enum class Direction : std::uint8_t { kForward = 0, kBackward = 1 };

constexpr int index_of(Direction d) { return static_cast<int>(d); }
std::string_view to_string(Direction d);
Direction parse_direction(std::string_view text);

using MapGrid = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One tracker output. The response map is shared and immutable, so copies are cheap.
struct TrackedFrame {
  int frame_idx = 0;
  Direction direction = Direction::kForward;
  BBox box;
  double confidence = 0.0;
  std::shared_ptr<const MapGrid> response;

  int map_size() const { return response ? static_cast<int>(response->rows()) : 0; }
};

enum class Source : std::uint8_t { kManual, kForward, kBackward, kFailure };

std::string_view to_string(Source s);
Source parse_source(std::string_view text);
Source source_of(Direction d);

struct AnnotationRecord {
  int frame_idx = 0;
  Source source = Source::kManual;
  std::optional<BBox> box;
  std::optional<double> quality;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct VideoMeta {
  std::string video_id;
  int frame_count = 0;
  int frame_width = 0;
  int frame_height = 0;
  int anchor_interval = 30;

  friend bool operator==(const VideoMeta&, const VideoMeta&) = default;
};

void validate_meta(const VideoMeta& meta);

/// Record-level invariants (source/box/quality consistency, box validity, range).
void validate_record(const AnnotationRecord& rec, const VideoMeta& meta);

/// Sorted, duplicate-free, in range, and exactly one record per frame.
void validate_finished(std::span<const AnnotationRecord> records, const VideoMeta& meta);

inline constexpr std::string_view kAnnotationMagic = "VIDANNO-ANN/1";
inline constexpr std::string_view kTrackerDumpMagic = "VIDANNO-TRK/1";

struct AnnotationFile {
  VideoMeta meta;
  std::vector<AnnotationRecord> records;
};

std::string format_annotations(std::span<const AnnotationRecord> records, const VideoMeta& meta);
AnnotationFile parse_annotations(std::string_view text);

void write_annotations(std::span<const AnnotationRecord> records, const VideoMeta& meta,
                       const std::filesystem::path& path);
AnnotationFile read_annotations(const std::filesystem::path& path);

struct DumpReadOptions {
  int expected_map_size = 32;
  // Bilinearly resample maps whose size differs instead of rejecting them.
  bool resize_maps = false;
};

/// Tracker dump directory: index.txt (magic line, then
/// `frame_idx,x_min,y_min,x_max,y_max,confidence`) plus one NNNNNN.f32 file of
/// row-major little-endian float32 values per response map.
void write_tracker_dump(const std::filesystem::path& dir, Direction direction,
                        std::span<const TrackedFrame> frames);
std::vector<TrackedFrame> read_tracker_dump(const std::filesystem::path& dir, Direction direction,
                                            const DumpReadOptions& options = {});

MapGrid resize_bilinear(const MapGrid& map, int size);

/// `video.txt`: the VideoMeta of a sequence directory.
void write_video_meta(const VideoMeta& meta, const std::filesystem::path& path);
VideoMeta read_video_meta(const std::filesystem::path& path);

/// One frame index per line.
void write_frame_list(std::span<const int> frames, const std::filesystem::path& path);
std::vector<int> read_frame_list(const std::filesystem::path& path);

}  // namespace vidanno
