// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "annotation_store.hpp"

#include "common.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace vidanno {
namespace fs = std::filesystem;

bool BBox::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max;
}

BBox BBox::from_center(double cx, double cy, double w, double h) {
  return BBox{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

void require_valid(const BBox& box, std::string_view what) {
  if (!box.valid()) {
    throw_invalid(std::string(what) + ": invalid box (" + format_double(box.x_min) + "," +
                  format_double(box.y_min) + "," + format_double(box.x_max) + "," +
                  format_double(box.y_max) + ")");
  }
}

std::string_view to_string(Direction d) {
  return d == Direction::kForward ? "forward" : "backward";
}

Direction parse_direction(std::string_view text) {
  text = trim(text);
  if (text == "forward" || text == "F") return Direction::kForward;
  if (text == "backward" || text == "B") return Direction::kBackward;
  throw_format("unknown direction '" + std::string(text) + "'");
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::kManual: return "manual";
    case Source::kForward: return "forward";
    case Source::kBackward: return "backward";
    case Source::kFailure: return "failure";
  }
  return "?";
}

Source parse_source(std::string_view text) {
  text = trim(text);
  if (text == "manual") return Source::kManual;
  if (text == "forward") return Source::kForward;
  if (text == "backward") return Source::kBackward;
  if (text == "failure") return Source::kFailure;
  throw_format("unknown source '" + std::string(text) + "'");
}

Source source_of(Direction d) {
  return d == Direction::kForward ? Source::kForward : Source::kBackward;
}

void validate_meta(const VideoMeta& meta) {
  if (meta.video_id.empty()) throw_invalid("video_id must not be empty");
  if (meta.video_id.find_first_of(",\n\r") != std::string::npos) {
    throw_invalid("video_id must not contain commas or newlines: " + meta.video_id);
  }
  if (meta.frame_count < 0) throw_invalid("frame_count must be non-negative");
  if (meta.frame_width <= 0 || meta.frame_height <= 0) {
    throw_invalid("frame dimensions must be positive");
  }
  if (meta.anchor_interval <= 0) throw_invalid("anchor_interval must be positive");
}

void validate_record(const AnnotationRecord& rec, const VideoMeta& meta) {
  const std::string where = "frame " + std::to_string(rec.frame_idx);
  if (rec.frame_idx < 0 || rec.frame_idx >= meta.frame_count) {
    throw_invalid(where + ": index out of range [0, " + std::to_string(meta.frame_count) + ")");
  }
  switch (rec.source) {
    case Source::kFailure:
      if (rec.box) throw_invalid(where + ": failure record must not carry a box");
      if (rec.quality) throw_invalid(where + ": failure record must not carry a quality");
      break;
    case Source::kManual:
      if (!rec.box) throw_invalid(where + ": manual record requires a box");
      if (rec.quality) throw_invalid(where + ": manual record must not carry a quality");
      require_valid(*rec.box, where);
      break;
    case Source::kForward:
    case Source::kBackward:
      if (!rec.box) throw_invalid(where + ": tracked record requires a box");
      if (!rec.quality || !(*rec.quality > 0.0) || !std::isfinite(*rec.quality)) {
        throw_invalid(where + ": tracked record requires a positive quality");
      }
      require_valid(*rec.box, where);
      break;
  }
}

namespace {

void validate_sorted_unique(std::span<const AnnotationRecord> records, const VideoMeta& meta) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    validate_record(records[i], meta);
    if (i > 0) {
      if (records[i].frame_idx == records[i - 1].frame_idx) {
        throw_invalid("duplicate frame index " + std::to_string(records[i].frame_idx));
      }
      if (records[i].frame_idx < records[i - 1].frame_idx) {
        throw_invalid("records not sorted at frame index " + std::to_string(records[i].frame_idx));
      }
    }
  }
}

}  // namespace

void validate_finished(std::span<const AnnotationRecord> records, const VideoMeta& meta) {
  validate_sorted_unique(records, meta);
  if (static_cast<int>(records.size()) != meta.frame_count) {
    throw_invalid("annotation set covers " + std::to_string(records.size()) + " of " +
                  std::to_string(meta.frame_count) + " frames");
  }
}

std::string format_annotations(std::span<const AnnotationRecord> records, const VideoMeta& meta) {
  validate_meta(meta);
  validate_sorted_unique(records, meta);
  std::string out;
  out.reserve(64 * (records.size() + 1));
  out += kAnnotationMagic;
  out += ',' + meta.video_id + ',' + std::to_string(meta.frame_count) + ',' +
         std::to_string(meta.frame_width) + ',' + std::to_string(meta.frame_height) + '\n';
  for (const auto& r : records) {
    out += std::to_string(r.frame_idx);
    out += ',';
    out += to_string(r.source);
    if (r.box) {
      out += ',' + format_double(r.box->x_min) + ',' + format_double(r.box->y_min) + ',' +
             format_double(r.box->x_max) + ',' + format_double(r.box->y_max);
    } else {
      out += ",,,,";
    }
    out += ',';
    if (r.quality) out += format_double(*r.quality);
    out += '\n';
  }
  return out;
}

AnnotationFile parse_annotations(std::string_view text) {
  AnnotationFile file;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = split(line, ',');
    const std::string where = "line " + std::to_string(line_no);
    try {
      if (!header_seen) {
        if (fields.size() != 5 || fields[0] != kAnnotationMagic) {
          throw_format("bad annotation header (expected " + std::string(kAnnotationMagic) + ")");
        }
        file.meta.video_id = std::string(fields[1]);
        file.meta.frame_count = static_cast<int>(parse_int(fields[2]));
        file.meta.frame_width = static_cast<int>(parse_int(fields[3]));
        file.meta.frame_height = static_cast<int>(parse_int(fields[4]));
        validate_meta(file.meta);
        header_seen = true;
        continue;
      }
      if (fields.size() != 7) throw_format("expected 7 fields, got " + std::to_string(fields.size()));
      AnnotationRecord rec;
      rec.frame_idx = static_cast<int>(parse_int(fields[0]));
      rec.source = parse_source(fields[1]);
      const bool any_box = !fields[2].empty() || !fields[3].empty() || !fields[4].empty() ||
                           !fields[5].empty();
      if (any_box) {
        rec.box = BBox{parse_double(fields[2]), parse_double(fields[3]), parse_double(fields[4]),
                       parse_double(fields[5])};
      }
      if (!fields[6].empty()) rec.quality = parse_double(fields[6]);
      validate_record(rec, file.meta);
      file.records.push_back(rec);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  if (!header_seen) throw_format("missing annotation header");
  validate_sorted_unique(file.records, file.meta);
  return file;
}

void write_annotations(std::span<const AnnotationRecord> records, const VideoMeta& meta,
                       const fs::path& path) {
  write_text_file(path, format_annotations(records, meta));
}

AnnotationFile read_annotations(const fs::path& path) {
  try {
    return parse_annotations(read_text_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

MapGrid resize_bilinear(const MapGrid& map, int size) {
  MapGrid out(size, size);
  const int rows = static_cast<int>(map.rows());
  const int cols = static_cast<int>(map.cols());
  for (int i = 0; i < size; ++i) {
    double sy = (i + 0.5) * rows / size - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(rows - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, rows - 1);
    const double fy = sy - y0;
    for (int j = 0; j < size; ++j) {
      double sx = (j + 0.5) * cols / size - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(cols - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, cols - 1);
      const double fx = sx - x0;
      const double top = map(y0, x0) * (1 - fx) + map(y0, x1) * fx;
      const double bottom = map(y1, x0) * (1 - fx) + map(y1, x1) * fx;
      out(i, j) = static_cast<float>(top * (1 - fy) + bottom * fy);
    }
  }
  return out;
}

namespace {

std::string map_file_name(int frame_idx) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d.f32", frame_idx);
  return buf;
}

static_assert(std::endian::native == std::endian::little, "dump format assumes little-endian host");

}  // namespace

void write_tracker_dump(const fs::path& dir, Direction direction,
                        std::span<const TrackedFrame> frames) {
  fs::create_directories(dir);
  std::string index;
  index += kTrackerDumpMagic;
  index += ',';
  index += to_string(direction);
  index += '\n';
  for (const auto& f : frames) {
    if (f.direction != direction) {
      throw_invalid("frame " + std::to_string(f.frame_idx) + " has the wrong direction");
    }
    if (!f.response) throw_invalid("frame " + std::to_string(f.frame_idx) + " has no response map");
    index += std::to_string(f.frame_idx) + ',' + format_double(f.box.x_min) + ',' +
             format_double(f.box.y_min) + ',' + format_double(f.box.x_max) + ',' +
             format_double(f.box.y_max) + ',' + format_double(f.confidence) + '\n';
    AtomicFile map_file(dir / map_file_name(f.frame_idx));
    map_file.write(std::string_view(reinterpret_cast<const char*>(f.response->data()),
                                    sizeof(float) * f.response->size()));
    map_file.commit();
  }
  write_text_file(dir / "index.txt", index);
}

std::vector<TrackedFrame> read_tracker_dump(const fs::path& dir, Direction direction,
                                            const DumpReadOptions& options) {
  const fs::path index_path = dir / "index.txt";
  const std::string text = read_text_file(index_path);
  std::vector<TrackedFrame> frames;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const std::string where = index_path.string() + ": line " + std::to_string(line_no);
    auto fields = split(line, ',');
    if (!header_seen) {
      if (fields.size() != 2 || fields[0] != kTrackerDumpMagic) {
        throw_format(where + ": bad tracker dump header");
      }
      Direction declared;
      try {
        declared = parse_direction(fields[1]);
      } catch (const Error& e) {
        throw_format(where + ": " + e.what());
      }
      if (declared != direction) {
        throw_format(where + ": dump holds " + std::string(to_string(declared)) +
                     " results, expected " + std::string(to_string(direction)));
      }
      header_seen = true;
      continue;
    }
    TrackedFrame f;
    f.direction = direction;
    try {
      if (fields.size() != 6) throw_format("expected 6 fields, got " + std::to_string(fields.size()));
      const long long idx = parse_int(fields[0]);
      if (idx < 0) throw_format("negative frame index");
      f.frame_idx = static_cast<int>(idx);
      f.box = BBox{parse_double(fields[1]), parse_double(fields[2]), parse_double(fields[3]),
                   parse_double(fields[4])};
      if (!f.box.valid()) throw_format("invalid box");
      f.confidence = parse_double(fields[5]);
      if (!std::isfinite(f.confidence)) throw_format("non-finite confidence");
    } catch (const Error& e) {
      throw_format(where + ": " + e.what());
    }
    if (f.confidence < 0.0 || f.confidence > 1.0) {
      warn("frame " + std::to_string(f.frame_idx) + ": confidence " + format_double(f.confidence) +
           " clipped to [0,1]");
      f.confidence = std::clamp(f.confidence, 0.0, 1.0);
    }
    const fs::path map_path = dir / map_file_name(f.frame_idx);
    std::error_code ec;
    const auto bytes = fs::file_size(map_path, ec);
    if (ec) throw_not_found("frame " + std::to_string(f.frame_idx) + ": missing response map " + map_path.string());
    const auto count = bytes / sizeof(float);
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(count))));
    if (bytes % sizeof(float) != 0 || static_cast<std::size_t>(side) * side != count || side == 0) {
      throw_format("frame " + std::to_string(f.frame_idx) + ": response map is not square");
    }
    MapGrid map(side, side);
    std::ifstream in(map_path, std::ios::binary);
    in.read(reinterpret_cast<char*>(map.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw_io("frame " + std::to_string(f.frame_idx) + ": short read on " + map_path.string());
    if (side != options.expected_map_size) {
      if (!options.resize_maps) {
        throw_format("frame " + std::to_string(f.frame_idx) + ": response map is " +
                     std::to_string(side) + "x" + std::to_string(side) + ", expected " +
                     std::to_string(options.expected_map_size) + "x" +
                     std::to_string(options.expected_map_size));
      }
      map = resize_bilinear(map, options.expected_map_size);
    }
    f.response = std::make_shared<const MapGrid>(std::move(map));
    frames.push_back(std::move(f));
  }
  if (!header_seen) throw_format(index_path.string() + ": missing tracker dump header");
  std::sort(frames.begin(), frames.end(),
            [](const TrackedFrame& a, const TrackedFrame& b) { return a.frame_idx < b.frame_idx; });
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame_idx == frames[i - 1].frame_idx) {
      throw_format(index_path.string() + ": duplicate frame " + std::to_string(frames[i].frame_idx));
    }
  }
  return frames;
}

void write_video_meta(const VideoMeta& meta, const fs::path& path) {
  validate_meta(meta);
  std::ostringstream ss;
  ss << "video_id=" << meta.video_id << '\n'
     << "frame_count=" << meta.frame_count << '\n'
     << "frame_width=" << meta.frame_width << '\n'
     << "frame_height=" << meta.frame_height << '\n'
     << "anchor_interval=" << meta.anchor_interval << '\n';
  write_text_file(path, ss.str());
}

VideoMeta read_video_meta(const fs::path& path) {
  const std::string text = read_text_file(path);
  VideoMeta meta;
  std::map<std::string, std::string, std::less<>> kv;
  for (auto line : split(text, '\n')) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw_format(path.string() + ": expected key=value");
    kv[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw_format(path.string() + ": missing " + key);
    return it->second;
  };
  meta.video_id = get("video_id");
  meta.frame_count = static_cast<int>(parse_int(get("frame_count")));
  meta.frame_width = static_cast<int>(parse_int(get("frame_width")));
  meta.frame_height = static_cast<int>(parse_int(get("frame_height")));
  if (kv.count("anchor_interval")) meta.anchor_interval = static_cast<int>(parse_int(kv["anchor_interval"]));
  validate_meta(meta);
  return meta;
}

void write_frame_list(std::span<const int> frames, const fs::path& path) {
  std::string out;
  for (int f : frames) out += std::to_string(f) + '\n';
  write_text_file(path, out);
}

std::vector<int> read_frame_list(const fs::path& path) {
  std::vector<int> out;
  const std::string text = read_text_file(path);
  for (auto line : split(text, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    out.push_back(static_cast<int>(parse_int(line)));
  }
  return out;
}

}  // namespace vidanno
