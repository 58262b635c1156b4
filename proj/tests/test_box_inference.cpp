// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "box_inference.hpp"
#include "common.hpp"
#include "mask_predictor.hpp"
#include "synth_oracle.hpp"
#include "t_assess.hpp"
#include "test_fixtures.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <random>

namespace vidanno {
namespace {

SearchRegion grid_region(int p, int q) {
  // One frame pixel per cell, away from the frame border.
  return make_search_region(BBox{100 + q / 4.0, 100 + p / 4.0, 100 + 3 * q / 4.0, 100 + 3 * p / 4.0}, 1000, 1000, p,
                            q);
}

TEST(RefineBox, RectangleIsRecovered) {
  const auto region = grid_region(16, 16);
  const BBox rect{region.col_to_x(3), region.row_to_y(5), region.col_to_x(11), region.row_to_y(9)};
  const Mask m = box_mask(region, rect);
  const auto b = refine_box(m, region, InferenceConfig{});
  ASSERT_TRUE(b);
  EXPECT_NEAR(b->x_min, rect.x_min, 1e-12);
  EXPECT_NEAR(b->y_min, rect.y_min, 1e-12);
  EXPECT_NEAR(b->x_max, rect.x_max, 1e-12);
  EXPECT_NEAR(b->y_max, rect.y_max, 1e-12);
  EXPECT_EQ(mask_box_indices(m, 0.5), (GridBox{3, 5, 10, 8}));
}

TEST(RefineBox, EmptyMaskIsAbsent) {
  const auto region = grid_region(16, 16);
  EXPECT_FALSE(refine_box(Mask::Zero(16, 16), region, InferenceConfig{}));
  EXPECT_FALSE(brute_force_box_from_mask(Mask::Zero(16, 16), 0.5));
}

TEST(RefineBox, LShapeMatchesBruteForce) {
  Mask m = Mask::Zero(10, 10);
  m.block(2, 1, 6, 2).setOnes();
  m.block(6, 1, 2, 7).setOnes();
  const auto a = mask_box_indices(m, 0.5);
  const auto b = brute_force_box_from_mask(m, 0.5);
  ASSERT_TRUE(a);
  EXPECT_EQ(*a, *b);
  EXPECT_EQ(*a, (GridBox{1, 2, 7, 7}));
}

TEST(RefineBox, ClippedRegionStaysInFrame) {
  const auto region = make_search_region(BBox{0, 0, 40, 30}, 320, 240, 16, 16);
  const auto b = refine_box(Mask::Ones(16, 16), region, InferenceConfig{});
  ASSERT_TRUE(b);
  EXPECT_EQ(b->x_min, 0);
  EXPECT_EQ(b->y_min, 0);
  EXPECT_EQ(b->x_max, 60);
  EXPECT_EQ(b->y_max, 45);
}

// Random masks of mixed density and scale against the independent double
// loop, exact index agreement.
TEST(RefineBoxOracle, ThousandRandomMasks) {
  std::mt19937_64 rng(1);
  int present = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int p = testing::uniform_int(rng, 1, 40), q = testing::uniform_int(rng, 1, 40);
    const double density = testing::uniform(rng, 0, 0.3);
    const double level = testing::uniform(rng, 0.05, 1.0);
    Mask m(p, q);
    for (int k = 0; k < m.size(); ++k) m.data()[k] = testing::uniform(rng, 0, 1) < density ? level * testing::uniform(rng, 0, 1) : 0.0;
    const double tau = testing::uniform(rng, 0.05, 1.0);
    const auto a = mask_box_indices(m, tau);
    const auto b = brute_force_box_from_mask(m, tau);
    ASSERT_EQ(a.has_value(), b.has_value()) << "rep " << rep;
    if (!a) continue;
    ++present;
    ASSERT_EQ(*a, *b) << "rep " << rep;
    const auto region = make_search_region(BBox{10, 10, 10 + testing::uniform(rng, 5, 200), 10 + testing::uniform(rng, 5, 200)},
                                           160, 120, p, q);
    const auto box = refine_box(m, region, InferenceConfig{tau, 0.0});
    if (box) {
      ASSERT_TRUE(box->valid());
      ASSERT_GE(box->x_min, 0);
      ASSERT_GE(box->y_min, 0);
      ASSERT_LE(box->x_max, 160);
      ASSERT_LE(box->y_max, 120);
    }
  }
  EXPECT_GT(present, 300);
  EXPECT_LT(present, 1000);
}

const BBox kF{0, 0, 10, 10};
const BBox kB{5, 5, 15, 15};

TEST(SelectAndFlag, Examples) {
  const InferenceConfig cfg;
  auto r = select_and_flag(7, 0.5, 0.2, std::nullopt, std::nullopt, kF, kB, cfg);
  EXPECT_EQ(r.source, Source::kForward);
  EXPECT_EQ(r.quality, 0.5);
  EXPECT_EQ(r.box, kF);
  r = select_and_flag(7, -0.1, -0.4, kF, kB, kF, kB, cfg);
  EXPECT_EQ(r.source, Source::kFailure);
  EXPECT_FALSE(r.box);
  EXPECT_FALSE(r.quality);
  r = select_and_flag(7, 0.3, 0.3, std::nullopt, std::nullopt, kF, kB, cfg);
  EXPECT_EQ(r.source, Source::kForward);
  r = select_and_flag(7, 0.0, 0.0, std::nullopt, std::nullopt, kF, kB, cfg);
  EXPECT_EQ(r.source, Source::kFailure);
}

TEST(SelectAndFlag, RefinedBoxWithFallback) {
  const InferenceConfig cfg;
  const BBox refined{1, 1, 9, 9};
  auto r = select_and_flag(3, 0.1, 0.6, refined, std::nullopt, kF, kB, cfg);
  EXPECT_EQ(r.source, Source::kBackward);
  EXPECT_EQ(r.box, kB);
  r = select_and_flag(3, 0.6, 0.1, refined, std::nullopt, kF, kB, cfg);
  EXPECT_EQ(r.box, refined);
}

TEST(SelectAndFlagProperty, PositiveScalingKeepsTheDecision) {
  std::mt19937_64 rng(2);
  const InferenceConfig cfg;
  for (int rep = 0; rep < 10000; ++rep) {
    const double gf = testing::uniform(rng, -1, 1), gb = testing::uniform(rng, -1, 1);
    const double c = std::exp(testing::uniform(rng, -5, 5));
    const auto a = select_and_flag(0, gf, gb, std::nullopt, std::nullopt, kF, kB, cfg);
    const auto b = select_and_flag(0, c * gf, c * gb, std::nullopt, std::nullopt, kF, kB, cfg);
    ASSERT_EQ(a.source, b.source);
    ASSERT_EQ(a.box, b.box);
  }
}

TEST(InferenceConfig, Validation) {
  EXPECT_THROW(validate(InferenceConfig{0.0, 0.0}), Error);
  EXPECT_THROW(validate(InferenceConfig{1.5, 0.0}), Error);
  EXPECT_NO_THROW(validate(InferenceConfig{1.0, 0.0}));
}

ModelConfig small_config() {
  ModelConfig c;
  c.map_size = 8;
  c.conv_channels = {4, 8};
  c.features = 8;
  c.hidden = 16;
  c.window_length = 20;
  c.seed = 3;
  return c;
}

// Constant positive scores: every frame is accepted.
AssessModel constant_scorer(double score) {
  AssessModel m(small_config());
  for (Direction d : {Direction::kForward, Direction::kBackward}) {
    auto& head = m.net().predictor(d).head();
    head.weight.value.setZero();
    head.bias.value.setConstant(score);
  }
  return m;
}

AnnotateConfig annotate_cfg(RefineMode mode) {
  AnnotateConfig c;
  c.refine = mode;
  c.rows = c.cols = 16;
  return c;
}

TEST(AnnotateVideo, OneRecordPerFrame) {
  const auto seq = generate_sequence(testing::small_synth(4, 91));
  const auto scorer = constant_scorer(0.5);
  const auto result = annotate_video(seq.data, scorer, nullptr, nullptr, nullptr, annotate_cfg(RefineMode::kNone));
  ASSERT_EQ(result.records.size(), 91u);
  int manual = 0;
  for (int f = 0; f < 91; ++f) {
    EXPECT_EQ(result.records[f].frame_idx, f);
    manual += result.records[f].source == Source::kManual;
  }
  EXPECT_EQ(manual, 4);
  for (int a : {0, 30, 60, 90}) EXPECT_EQ(result.records[a].source, Source::kManual);
  EXPECT_EQ(result.frames.size(), 87u);
  EXPECT_THROW(annotate_video(seq.data, scorer, nullptr, nullptr, nullptr, annotate_cfg(RefineMode::kVisual)), Error);
}

TEST(AnnotateVideo, NoiselessTrackerIsPerfect) {
  auto cfg = testing::small_synth(5, 181);
  cfg.sigma_pos = cfg.sigma_scale = 0;
  cfg.p_drift = 0;
  cfg.occlusion_rate = 0;
  const auto seq = generate_sequence(cfg);
  const auto result = annotate_video(seq.data, constant_scorer(0.5), nullptr, nullptr, nullptr,
                                     annotate_cfg(RefineMode::kNone));
  EXPECT_TRUE(result.failures.empty());
  const auto report = evaluate(result.records, seq.data.ground_truth);
  EXPECT_NEAR(report.miou, 1.0, 1e-12);
  EXPECT_EQ(report.failures, 0);
}

TEST(AnnotateVideo, DeterministicAndDirectionIsolated) {
  const auto seq = generate_sequence(testing::small_synth(6, 121));
  AssessModel model(small_config());
  const auto video = VideoContext{seq.data.meta, seq.data.manual, nullptr, seq.scene};
  const OracleMaskPredictor oracle;
  GeometryModel geo(small_config());
  const auto cfg = annotate_cfg(RefineMode::kVisualGeometric);
  const auto a = annotate_video(seq.data, model, &geo, &oracle, &video, cfg);
  const auto b = annotate_video(seq.data, model, &geo, &oracle, &video, cfg);
  EXPECT_EQ(a.records, b.records);
  // Perturbing the backward scorer leaves every forward score untouched.
  for (auto* p : model.net().predictor_parameters(Direction::kBackward)) p->value.array() *= 1.5;
  const auto c = annotate_video(seq.data, model, &geo, &oracle, &video, cfg);
  ASSERT_EQ(a.frames.size(), c.frames.size());
  bool backward_changed = false;
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    EXPECT_EQ(a.frames[i].score[0], c.frames[i].score[0]);
    backward_changed |= a.frames[i].score[1] != c.frames[i].score[1];
  }
  EXPECT_TRUE(backward_changed);
}

TEST(AnnotateVideo, HeavyDriftFailuresLandOnDriftedFrames) {
  auto synth = [](std::uint64_t seed) {
    auto c = testing::small_synth(seed, 241);
    c.p_drift = 0.4;
    return generate_sequence(c);
  };
  std::vector<AssessSample> train;
  for (int i = 0; i < 8; ++i) {
    auto s = make_assess_samples(synth(200 + i).data, 20, 10, {});
    train.insert(train.end(), s.begin(), s.end());
  }
  AssessModel model(small_config());
  TrainConfig tc;
  tc.epochs = 8;
  tc.batch_size = 8;
  tc.restore_best = false;
  train_assess(model, train, {}, tc);

  int frames = 0, drifted = 0, failures = 0, drifted_failures = 0;
  for (int i = 0; i < 4; ++i) {
    const auto seq = synth(300 + i);
    const auto result = annotate_video(seq.data, model, nullptr, nullptr, nullptr, annotate_cfg(RefineMode::kNone));
    for (const auto& d : result.frames) {
      const bool bad = seq.drifted[0][d.frame_idx] || seq.drifted[1][d.frame_idx];
      ++frames;
      drifted += bad;
    }
    for (int f : result.failures) {
      ++failures;
      drifted_failures += seq.drifted[0][f] || seq.drifted[1][f];
    }
  }
  ASSERT_GT(drifted, 0);
  EXPECT_GT(failures, 0);
  EXPECT_GT(static_cast<double>(drifted_failures) / std::max(failures, 1), static_cast<double>(drifted) / frames)
      << drifted_failures << "/" << failures << " vs " << drifted << "/" << frames;
}

TEST(VariantRecords, RowsFollowTheirRule) {
  const auto seq = generate_sequence(testing::small_synth(7, 91));
  AssessModel model(small_config());
  const auto result = annotate_video(seq.data, model, nullptr, nullptr, nullptr, annotate_cfg(RefineMode::kNone));
  const InferenceConfig cfg;
  const auto fwd = variant_records(result, seq.data.manual, Variant::kForward, cfg);
  const auto sel = variant_records(result, seq.data.manual, Variant::kSelect, cfg);
  const auto fail = variant_records(result, seq.data.manual, Variant::kSelectFail, cfg);
  ASSERT_EQ(fwd.size(), 91u);
  EXPECT_EQ(fail, result.records);
  for (const auto& d : result.frames) {
    EXPECT_EQ(fwd[d.frame_idx].box, d.tracker[0]);
    const int k = d.score[0] >= d.score[1] ? 0 : 1;
    EXPECT_EQ(sel[d.frame_idx].box, d.tracker[k]);
  }
}

TEST(Diagnostics, RoundTrip) {
  testing::TempDir dir;
  FrameDiagnostics d;
  d.frame_idx = 12;
  d.score = {0.25, -0.125};
  d.tracker = {BBox{1, 2, 3, 4}, BBox{5, 6, 7, 8}};
  d.visual = {BBox{1.5, 2, 3, 4}, std::nullopt};
  d.geometric = {std::nullopt, BBox{5, 6.5, 7, 8}};
  d.theta = {GaussianParams{0.4, 0.6, 0.2, 0.3, 1.5}, GaussianParams{}};
  write_diagnostics(std::vector<FrameDiagnostics>{d}, dir / "d.csv");
  const auto back = read_diagnostics(dir / "d.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].frame_idx, 12);
  EXPECT_EQ(back[0].score, d.score);
  EXPECT_EQ(back[0].tracker, d.tracker);
  EXPECT_EQ(back[0].visual, d.visual);
  EXPECT_EQ(back[0].geometric, d.geometric);
}

}  // namespace
}  // namespace vidanno
