// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "snippet_pipeline.hpp"

#include "common.hpp"

#include <algorithm>
#include <tuple>

namespace vidanno {

std::vector<int> default_anchors(const VideoMeta& meta) {
  std::vector<int> anchors;
  if (meta.frame_count <= 0) return anchors;
  for (int f = 0; f < meta.frame_count; f += meta.anchor_interval) anchors.push_back(f);
  if (anchors.back() != meta.frame_count - 1) anchors.push_back(meta.frame_count - 1);
  return anchors;
}

std::vector<Span> split_video(const VideoMeta& meta, std::vector<int> manual_frames) {
  std::sort(manual_frames.begin(), manual_frames.end());
  manual_frames.erase(std::unique(manual_frames.begin(), manual_frames.end()), manual_frames.end());
  if (manual_frames.size() < 2) throw_invalid("at least two manual anchors are required");
  for (int f : manual_frames) {
    if (f < 0 || f >= meta.frame_count) {
      throw_invalid("anchor " + std::to_string(f) + " outside [0, " + std::to_string(meta.frame_count) + ")");
    }
  }
  if (manual_frames.front() != 0 || manual_frames.back() != meta.frame_count - 1) {
    throw_invalid("anchors must include the first and last frame");
  }
  std::vector<Span> spans;
  spans.reserve(manual_frames.size() - 1);
  for (std::size_t i = 0; i + 1 < manual_frames.size(); ++i) {
    spans.push_back(Span{manual_frames[i], manual_frames[i + 1]});
  }
  return spans;
}

namespace {

std::map<int, const TrackedFrame*> by_index(std::span<const TrackedFrame> frames, Direction d) {
  std::map<int, const TrackedFrame*> out;
  for (const auto& f : frames) {
    if (f.direction != d) {
      throw_invalid("frame " + std::to_string(f.frame_idx) + " carries the wrong direction");
    }
    if (!out.emplace(f.frame_idx, &f).second) {
      throw_invalid("frame " + std::to_string(f.frame_idx) + " tracked twice in " +
                    std::string(to_string(d)) + " direction");
    }
  }
  return out;
}

}  // namespace

std::vector<Snippet> assemble_snippets(std::span<const Span> spans,
                                       std::span<const TrackedFrame> forward,
                                       std::span<const TrackedFrame> backward) {
  const auto fwd = by_index(forward, Direction::kForward);
  const auto bwd = by_index(backward, Direction::kBackward);
  std::vector<Snippet> out;
  out.reserve(spans.size());
  for (const auto& span : spans) {
    Snippet snip;
    snip.span = span;
    for (int f = span.start + 1; f <= span.end; ++f) {
      auto it = fwd.find(f);
      if (it == fwd.end()) throw_not_found("missing forward result for frame " + std::to_string(f));
      snip.frames_fwd.push_back(*it->second);
    }
    for (int f = span.end - 1; f >= span.start; --f) {
      auto it = bwd.find(f);
      if (it == bwd.end()) throw_not_found("missing backward result for frame " + std::to_string(f));
      snip.frames_bwd.push_back(*it->second);
    }
    out.push_back(std::move(snip));
  }
  return out;
}

MergedVideo merge_directions(std::span<const Snippet> snippets, const std::map<int, BBox>& manual_boxes) {
  MergedVideo merged;
  std::map<int, const TrackedFrame*> fwd;
  std::map<int, const TrackedFrame*> bwd;
  for (const auto& s : snippets) {
    for (int a : {s.span.start, s.span.end}) {
      auto it = manual_boxes.find(a);
      if (it == manual_boxes.end()) throw_invalid("anchor frame " + std::to_string(a) + " has no manual box");
      merged.anchors[a] = it->second;
    }
  }
  auto collect = [&](const std::vector<TrackedFrame>& frames, std::map<int, const TrackedFrame*>& dst,
                     Direction d) {
    for (const auto& f : frames) {
      if (merged.anchors.count(f.frame_idx)) continue;
      if (!dst.emplace(f.frame_idx, &f).second) {
        throw_invalid("frame " + std::to_string(f.frame_idx) + " appears in two snippets (" +
                      std::string(to_string(d)) + ")");
      }
    }
  };
  for (const auto& s : snippets) {
    collect(s.frames_fwd, fwd, Direction::kForward);
    collect(s.frames_bwd, bwd, Direction::kBackward);
  }
  for (const auto& [idx, f] : fwd) {
    auto it = bwd.find(idx);
    if (it == bwd.end()) throw_invalid("frame " + std::to_string(idx) + " has no backward result");
    merged.pairs.emplace(idx, FramePair{*f, *it->second});
  }
  for (const auto& [idx, f] : bwd) {
    if (!fwd.count(idx)) throw_invalid("frame " + std::to_string(idx) + " has no forward result");
  }
  return merged;
}

int Window::valid_count() const {
  return static_cast<int>(std::count(valid_mask.begin(), valid_mask.end(), true));
}

std::vector<Window> make_windows(std::span<const TrackedFrame> span_frames, int length, int stride) {
  if (length < 2) throw_invalid("window length must be at least 2");
  if (stride < 1) throw_invalid("window stride must be at least 1");
  std::vector<Window> out;
  const int n = static_cast<int>(span_frames.size());
  if (n == 0) return out;
  const Direction d = span_frames.front().direction;
  auto build = [&](int offset) {
    Window w;
    w.length = length;
    w.direction = d;
    w.offset = offset;
    w.frames.reserve(length);
    w.valid_mask.reserve(length);
    for (int k = 0; k < length; ++k) {
      const int src = offset + k;
      const bool real = src < n;
      w.frames.push_back(span_frames[std::min(src, n - 1)]);
      w.valid_mask.push_back(real);
    }
    return w;
  };
  if (n <= length) {
    out.push_back(build(0));
    return out;
  }
  int offset = 0;
  for (; offset + length <= n; offset += stride) out.push_back(build(offset));
  if (out.back().offset + length < n) out.push_back(build(n - length));
  return out;
}

std::map<int, double> scatter_window_outputs(std::span<const Window> windows,
                                            std::span<const std::vector<double>> values) {
  if (windows.size() != values.size()) throw_invalid("window/value count mismatch");
  // (frame, offset, slot, value); sorted so that summation order is fixed.
  std::vector<std::tuple<int, int, int, double>> contributions;
  std::map<int, bool> seen;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& win = windows[w];
    if (static_cast<int>(values[w].size()) != win.length) {
      throw_invalid("window at offset " + std::to_string(win.offset) + " has " +
                    std::to_string(values[w].size()) + " values for " + std::to_string(win.length) +
                    " slots");
    }
    for (int k = 0; k < win.length; ++k) {
      const int frame = win.frames[k].frame_idx;
      seen.emplace(frame, false);
      if (!win.valid_mask[k]) continue;
      seen[frame] = true;
      contributions.emplace_back(frame, win.offset, k, values[w][k]);
    }
  }
  for (const auto& [frame, covered] : seen) {
    if (!covered) throw_invalid("frame " + std::to_string(frame) + " covered by no valid slot");
  }
  std::sort(contributions.begin(), contributions.end());
  std::map<int, double> out;
  std::size_t i = 0;
  while (i < contributions.size()) {
    const int frame = std::get<0>(contributions[i]);
    double sum = 0.0;
    int count = 0;
    for (; i < contributions.size() && std::get<0>(contributions[i]) == frame; ++i) {
      sum += std::get<3>(contributions[i]);
      ++count;
    }
    out[frame] = sum / count;
  }
  return out;
}

std::vector<SpanWindows> window_snippets(std::span<const Snippet> snippets, int length, int stride) {
  std::vector<SpanWindows> out;
  out.reserve(2 * snippets.size());
  for (std::size_t i = 0; i < snippets.size(); ++i) {
    for (Direction d : {Direction::kForward, Direction::kBackward}) {
      SpanWindows sw;
      sw.span_id = static_cast<int>(i);
      sw.span = snippets[i].span;
      sw.direction = d;
      sw.windows = make_windows(d == Direction::kForward ? snippets[i].frames_fwd : snippets[i].frames_bwd,
                                length, stride);
      out.push_back(std::move(sw));
    }
  }
  return out;
}

std::vector<int> SequenceData::anchors() const {
  std::vector<int> out;
  out.reserve(manual.size());
  for (const auto& [idx, box] : manual) out.push_back(idx);
  return out;
}

std::vector<Snippet> snippets_of(const SequenceData& data) {
  const auto spans = split_video(data.meta, data.anchors());
  return assemble_snippets(spans, data.forward, data.backward);
}

void write_window_index(const WindowIndex& index, const std::filesystem::path& path) {
  std::string out;
  out += kWindowIndexMagic;
  out += ',' + index.video_id + ',' + std::to_string(index.length) + ',' + std::to_string(index.stride) + '\n';
  for (const auto& e : index.entries) {
    out += std::to_string(e.window_id) + ',' + std::to_string(e.span.start) + ',' +
           std::to_string(e.span.end) + ',' + std::to_string(e.offset) + ',' +
           std::string(to_string(e.direction)) + ',' + std::to_string(e.valid) + '\n';
  }
  write_text_file(path, out);
}

WindowIndex read_window_index(const std::filesystem::path& path) {
  WindowIndex index;
  bool header = false;
  int line_no = 0;
  const std::string text = read_text_file(path);
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto f = split(line, ',');
    const std::string where = path.string() + ": line " + std::to_string(line_no);
    try {
      if (!header) {
        if (f.size() != 4 || f[0] != kWindowIndexMagic) throw_format("bad window index header");
        index.video_id = std::string(f[1]);
        index.length = static_cast<int>(parse_int(f[2]));
        index.stride = static_cast<int>(parse_int(f[3]));
        header = true;
        continue;
      }
      if (f.size() != 6) throw_format("expected 6 fields");
      WindowIndexEntry e;
      e.window_id = static_cast<int>(parse_int(f[0]));
      e.span = Span{static_cast<int>(parse_int(f[1])), static_cast<int>(parse_int(f[2]))};
      e.offset = static_cast<int>(parse_int(f[3]));
      e.direction = parse_direction(f[4]);
      e.valid = static_cast<int>(parse_int(f[5]));
      index.entries.push_back(e);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  if (!header) throw_format(path.string() + ": missing window index header");
  return index;
}

}  // namespace vidanno
