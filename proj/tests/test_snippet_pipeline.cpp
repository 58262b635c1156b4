// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "common.hpp"
#include "snippet_pipeline.hpp"
#include "test_fixtures.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

namespace vidanno {
namespace {

using testing::toy_frame;
using testing::toy_meta;
using testing::toy_sequence;

TEST(SplitVideo, EvenAnchors) {
  const auto spans = split_video(toy_meta(91), {0, 30, 60, 90});
  EXPECT_EQ(spans, (std::vector<Span>{{0, 30}, {30, 60}, {60, 90}}));
}

TEST(SplitVideo, SingleSpan) {
  EXPECT_EQ(split_video(toy_meta(31), {30, 0}), (std::vector<Span>{{0, 30}}));
}

TEST(SplitVideo, ShortTail) {
  const auto meta = toy_meta(75);
  EXPECT_EQ(default_anchors(meta), (std::vector<int>{0, 30, 60, 74}));
  EXPECT_EQ(split_video(meta, {60, 0, 74, 30}), (std::vector<Span>{{0, 30}, {30, 60}, {60, 74}}));
}

TEST(SplitVideo, Errors) {
  EXPECT_THROW(split_video(toy_meta(31), {0}), Error);
  EXPECT_THROW(split_video(toy_meta(31), {0, 20}), Error);
  EXPECT_THROW(split_video(toy_meta(31), {0, 31}), Error);
}

TEST(MergeDirections, NinetyOneFrames) {
  const auto seq = toy_sequence(91, {0, 30, 60, 90});
  const auto snippets = snippets_of(seq);
  ASSERT_EQ(snippets.size(), 3u);
  const auto merged = merge_directions(snippets, seq.manual);
  EXPECT_EQ(merged.pairs.size(), 87u);
  EXPECT_EQ(merged.anchors.size(), 4u);
  for (const auto& [idx, pair] : merged.pairs) {
    EXPECT_EQ(pair.forward.frame_idx, idx);
    EXPECT_EQ(pair.backward.frame_idx, idx);
    EXPECT_EQ(pair.forward.direction, Direction::kForward);
    EXPECT_EQ(pair.backward.direction, Direction::kBackward);
    EXPECT_FALSE(seq.manual.count(idx));
  }
}

TEST(MergeDirections, SingleSpan) {
  const auto seq = toy_sequence(31, {0, 30});
  EXPECT_EQ(merge_directions(snippets_of(seq), seq.manual).pairs.size(), 29u);
}

TEST(MergeDirections, MissingBackwardIsAnError) {
  const auto seq = toy_sequence(31, {0, 30});
  auto snippets = snippets_of(seq);
  snippets[0].frames_bwd.erase(snippets[0].frames_bwd.begin() + 5);
  try {
    merge_directions(snippets, seq.manual);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("frame 24"), std::string::npos) << e.what();
  }
  auto bad = seq;
  bad.backward.erase(bad.backward.begin() + 3);
  EXPECT_THROW(snippets_of(bad), Error);
}

TEST(Snippets, TrackingOrder) {
  const auto seq = toy_sequence(75, {0, 30, 60, 74});
  for (const auto& s : snippets_of(seq)) {
    ASSERT_EQ(static_cast<int>(s.frames_fwd.size()), s.span.length());
    ASSERT_EQ(static_cast<int>(s.frames_bwd.size()), s.span.length());
    for (int k = 0; k < s.span.length(); ++k) {
      EXPECT_EQ(s.frames_fwd[k].frame_idx, s.span.start + 1 + k);
      EXPECT_EQ(s.frames_bwd[k].frame_idx, s.span.end - 1 - k);
    }
  }
}

std::vector<TrackedFrame> run_of(int n) {
  std::vector<TrackedFrame> f;
  for (int i = 0; i < n; ++i) f.push_back(toy_frame(100 + i, Direction::kForward));
  return f;
}

TEST(MakeWindows, ThirtyFrames) {
  const auto w = make_windows(run_of(30), 20, 10);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].offset, 0);
  EXPECT_EQ(w[1].offset, 10);
  EXPECT_EQ(w[1].valid_count(), 20);
}

TEST(MakeWindows, ExactLength) {
  const auto w = make_windows(run_of(20), 20, 10);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].valid_count(), 20);
}

TEST(MakeWindows, ShortSpanIsPadded) {
  const auto w = make_windows(run_of(7), 20, 10);
  ASSERT_EQ(w.size(), 1u);
  ASSERT_EQ(w[0].frames.size(), 20u);
  EXPECT_EQ(w[0].valid_count(), 7);
  for (int k = 7; k < 20; ++k) {
    EXPECT_FALSE(w[0].valid_mask[k]);
    EXPECT_EQ(w[0].frames[k].frame_idx, 106);
  }
}

TEST(MakeWindows, RaggedTailIsRightAligned) {
  const auto w = make_windows(run_of(29), 20, 10);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[1].offset, 9);
  EXPECT_EQ(w[1].frames.back().frame_idx, 128);
}

TEST(MakeWindows, EmptyAndBadArguments) {
  EXPECT_TRUE(make_windows({}, 20, 10).empty());
  EXPECT_THROW(make_windows(run_of(5), 1, 1), Error);
  EXPECT_THROW(make_windows(run_of(5), 20, 0), Error);
}

TEST(Scatter, SingleCoverage) {
  const auto w = make_windows(run_of(20), 20, 10);
  std::vector<std::vector<double>> v{std::vector<double>(20, 0.4)};
  const auto out = scatter_window_outputs(w, v);
  EXPECT_EQ(out.size(), 20u);
  EXPECT_DOUBLE_EQ(out.at(105), 0.4);
}

TEST(Scatter, MeanOfTwoWindows) {
  const auto w = make_windows(run_of(30), 20, 10);
  std::vector<std::vector<double>> v{std::vector<double>(20, 0.2), std::vector<double>(20, 0.6)};
  const auto out = scatter_window_outputs(w, v);
  EXPECT_DOUBLE_EQ(out.at(100), 0.2);
  EXPECT_DOUBLE_EQ(out.at(115), 0.4);
  EXPECT_DOUBLE_EQ(out.at(125), 0.6);
}

TEST(Scatter, PaddedSlotsIgnored) {
  const auto w = make_windows(run_of(7), 20, 10);
  std::vector<double> v(20, 100.0);
  for (int k = 0; k < 7; ++k) v[k] = 0.1 * k;
  const auto out = scatter_window_outputs(w, std::vector<std::vector<double>>{v});
  EXPECT_DOUBLE_EQ(out.at(106), 0.6);
}

TEST(Scatter, UncoveredFrameIsAnError) {
  auto w = make_windows(run_of(20), 20, 10);
  w[0].valid_mask[3] = false;
  EXPECT_THROW(scatter_window_outputs(w, std::vector<std::vector<double>>{std::vector<double>(20, 0.0)}), Error);
}

// Random lengths, lengths and strides against a direct per-frame average,
// then permutation invariance over the window order.
TEST(ScatterProperty, MatchesBruteForceAndIsPermutationInvariant) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = testing::uniform_int(rng, 1, 80);
    const int length = testing::uniform_int(rng, 2, 25);
    const int stride = testing::uniform_int(rng, 1, length);
    const auto frames = run_of(n);
    auto windows = make_windows(frames, length, stride);
    std::vector<std::vector<double>> values;
    for (const auto& w : windows) {
      std::vector<double> v(length);
      for (auto& x : v) x = testing::uniform(rng, -1, 1);
      values.push_back(v);
    }
    std::map<int, std::pair<double, int>> acc;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      for (int k = 0; k < length; ++k) {
        if (!windows[i].valid_mask[k]) continue;
        auto& a = acc[windows[i].frames[k].frame_idx];
        a.first += values[i][k];
        a.second += 1;
      }
    }
    const auto out = scatter_window_outputs(windows, values);
    ASSERT_EQ(out.size(), static_cast<std::size_t>(n));
    for (const auto& [f, a] : acc) ASSERT_NEAR(out.at(f), a.first / a.second, 1e-12);

    std::vector<std::size_t> perm(windows.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Window> pw;
    std::vector<std::vector<double>> pv;
    for (auto i : perm) {
      pw.push_back(windows[i]);
      pv.push_back(values[i]);
    }
    ASSERT_EQ(scatter_window_outputs(pw, pv), out);
  }
}

// Random anchor sets: spans partition the video, every non-anchor frame is
// tracked once per direction, and every frame gets a valid window slot.
TEST(PipelineProperty, PartitionAndCoverage) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const int frames = testing::uniform_int(rng, 2, 200);
    std::set<int> anchor_set{0, frames - 1};
    const int extra = testing::uniform_int(rng, 0, 8);
    for (int i = 0; i < extra; ++i) anchor_set.insert(testing::uniform_int(rng, 0, frames - 1));
    std::vector<int> anchors(anchor_set.begin(), anchor_set.end());
    std::shuffle(anchors.begin(), anchors.end(), rng);
    const auto seq = toy_sequence(frames, anchors);

    const auto spans = split_video(seq.meta, anchors);
    int total = 0;
    for (const auto& s : spans) total += s.length();
    ASSERT_EQ(total, frames - 1);

    const auto snippets = snippets_of(seq);
    for (Direction d : {Direction::kForward, Direction::kBackward}) {
      std::set<int> seen;
      for (const auto& s : snippets) {
        for (const auto& f : d == Direction::kForward ? s.frames_fwd : s.frames_bwd) {
          ASSERT_TRUE(seen.insert(f.frame_idx).second) << "frame tracked twice";
        }
      }
      ASSERT_EQ(static_cast<int>(seen.size()), frames - 1);
    }

    const auto merged = merge_directions(snippets, seq.manual);
    ASSERT_EQ(merged.pairs.size() + merged.anchors.size(), static_cast<std::size_t>(frames));

    const int length = testing::uniform_int(rng, 2, 25);
    const int stride = testing::uniform_int(rng, 1, length);
    const auto sw = window_snippets(snippets, length, stride);
    ASSERT_EQ(sw.size(), 2 * snippets.size());
    std::array<std::set<int>, 2> covered;
    for (const auto& s : sw) {
      for (const auto& w : s.windows) {
        ASSERT_EQ(static_cast<int>(w.frames.size()), length);
        for (int k = 0; k < length; ++k) {
          if (w.valid_mask[k]) covered[index_of(s.direction)].insert(w.frames[k].frame_idx);
        }
      }
    }
    for (const auto& [idx, pair] : merged.pairs) {
      ASSERT_TRUE(covered[0].count(idx));
      ASSERT_TRUE(covered[1].count(idx));
    }
  }
}

TEST(PipelineProperty, Deterministic) {
  const auto seq = toy_sequence(75, {0, 30, 60, 74});
  const auto a = window_snippets(snippets_of(seq), 20, 10);
  const auto b = window_snippets(snippets_of(seq), 20, 10);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].windows.size(), b[i].windows.size());
    for (std::size_t j = 0; j < a[i].windows.size(); ++j) {
      EXPECT_EQ(a[i].windows[j].offset, b[i].windows[j].offset);
      EXPECT_EQ(a[i].windows[j].valid_mask, b[i].windows[j].valid_mask);
      for (std::size_t k = 0; k < a[i].windows[j].frames.size(); ++k) {
        EXPECT_EQ(a[i].windows[j].frames[k].frame_idx, b[i].windows[j].frames[k].frame_idx);
      }
    }
  }
}

TEST(WindowIndexFile, RoundTrip) {
  testing::TempDir dir;
  WindowIndex index;
  index.video_id = "v";
  index.length = 20;
  index.stride = 10;
  index.entries = {{0, {0, 30}, 0, Direction::kForward, 20}, {1, {0, 30}, 9, Direction::kBackward, 20},
                   {2, {60, 74}, 0, Direction::kForward, 14}};
  write_window_index(index, dir / "w.win");
  const auto back = read_window_index(dir / "w.win");
  EXPECT_EQ(back.video_id, "v");
  EXPECT_EQ(back.length, 20);
  EXPECT_EQ(back.stride, 10);
  EXPECT_EQ(back.entries, index.entries);
}

}  // namespace
}  // namespace vidanno
