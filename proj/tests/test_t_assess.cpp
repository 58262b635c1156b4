// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "common.hpp"
#include "stages.hpp"
#include "synth_oracle.hpp"
#include "t_assess.hpp"
#include "test_fixtures.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace vidanno {
namespace {

ModelConfig small_config(int length = 20, nn::SequenceKind kind = nn::SequenceKind::kLstm) {
  ModelConfig c;
  c.map_size = 8;
  c.conv_channels = {4, 8};
  c.features = 8;
  c.hidden = 16;
  c.layers = 3;
  c.kind = kind;
  c.window_length = length;
  c.seed = 5;
  return c;
}

const VideoMeta kMeta = testing::toy_meta(500, 320, 240);

TEST(ExtractFeature, TailIsNormalizedBoxAndConfidence) {
  AssessModel model(small_config());
  TrackedFrame f = testing::toy_frame(3, Direction::kForward);
  f.box = BBox{0, 0, 320, 240};
  f.confidence = 1.0;
  const auto feat = model.extract_feature(f, kMeta);
  ASSERT_EQ(feat.size(), 13u);
  EXPECT_EQ(std::vector<double>(feat.end() - 5, feat.end()), (std::vector<double>{0, 0, 1, 1, 1}));
}

TEST(ExtractFeature, ZeroMapIsDeterministic) {
  AssessModel model(small_config());
  TrackedFrame f = testing::toy_frame(0, Direction::kBackward);
  f.response = std::make_shared<const MapGrid>(MapGrid::Zero(8, 8));
  const auto a = model.extract_feature(f, kMeta);
  const auto b = model.extract_feature(f, kMeta);
  EXPECT_EQ(a, b);
  std::mt19937_64 rng(1);
  const Window w = testing::random_window(rng, 20, 8, Direction::kForward, 20);
  EXPECT_EQ(model.extract_feature(w.frames[4], kMeta), model.extract_feature(w.frames[4], kMeta));
}

TEST(ExtractFeature, NonFiniteMapIsRejected) {
  AssessModel model(small_config());
  TrackedFrame f = testing::toy_frame(0, Direction::kForward);
  MapGrid m = MapGrid::Zero(8, 8);
  m(2, 3) = std::nanf("");
  f.response = std::make_shared<const MapGrid>(m);
  EXPECT_THROW(model.extract_feature(f, kMeta), Error);
}

TEST(PredictScores, ZeroHeadGivesZeroScores) {
  AssessModel model(small_config());
  for (Direction d : {Direction::kForward, Direction::kBackward}) {
    for (auto* p : model.net().predictor(d).head_parameters()) p->value.setZero();
  }
  std::mt19937_64 rng(2);
  for (Direction d : {Direction::kForward, Direction::kBackward}) {
    const auto scores = model.predict_scores(testing::random_window(rng, 20, 8, d, 13), kMeta);
    ASSERT_EQ(scores.size(), 20u);
    for (double s : scores) EXPECT_EQ(s, 0.0);
  }
}

TEST(PredictScores, LengthMismatchIsRejected) {
  AssessModel model(small_config(20));
  std::mt19937_64 rng(3);
  EXPECT_THROW(model.predict_scores(testing::random_window(rng, 10, 8, Direction::kForward, 10), kMeta), Error);
}

TEST(PredictScores, BatchedEqualsSingle) {
  AssessModel model(small_config());
  std::mt19937_64 rng(4);
  std::vector<Window> windows;
  for (int v : {20, 7, 15}) windows.push_back(testing::random_window(rng, 20, 8, Direction::kBackward, v));
  std::vector<BatchItem> items;
  for (const auto& w : windows) items.push_back({&w, kMeta.frame_width, kMeta.frame_height});
  const auto batched = model.predict_scores(items);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto single = model.predict_scores(windows[i], kMeta);
    for (int t = 0; t < 20; ++t) EXPECT_NEAR(batched[i][t], single[t], 1e-12);
  }
  EXPECT_EQ(model.predict_scores(windows[0], kMeta), model.predict_scores(windows[0], kMeta));
}

TEST(PredictScores, DirectionIsolation) {
  AssessModel model(small_config());
  std::mt19937_64 rng(5);
  const Window fwd = testing::random_window(rng, 20, 8, Direction::kForward, 20);
  const Window bwd = testing::random_window(rng, 20, 8, Direction::kBackward, 20);
  const auto f0 = model.predict_scores(fwd, kMeta);
  const auto b0 = model.predict_scores(bwd, kMeta);
  for (auto* p : model.net().predictor_parameters(Direction::kBackward)) p->value.array() += 0.05;
  EXPECT_EQ(model.predict_scores(fwd, kMeta), f0);
  EXPECT_NE(model.predict_scores(bwd, kMeta), b0);
  const auto b1 = model.predict_scores(bwd, kMeta);
  for (auto* p : model.net().predictor_parameters(Direction::kForward)) p->value.array() -= 0.05;
  EXPECT_EQ(model.predict_scores(bwd, kMeta), b1);
}

TEST(LossConf, Examples) {
  const std::vector<bool> one{true};
  EXPECT_EQ(loss_conf(std::vector<double>{0.5}, std::vector<double>{0.0}, one), 0.25);
  const std::vector<double> v{0.1, -0.3, 0.7};
  EXPECT_EQ(loss_conf(v, v, std::vector<bool>(3, true)), 0.0);
  EXPECT_THROW(loss_conf(v, std::vector<double>{0.1}, std::vector<bool>(3, true)), Error);
}

TEST(LossConf, MatchesScalarSum) {
  std::mt19937_64 rng(6);
  std::vector<std::vector<double>> pred, target;
  std::vector<std::vector<bool>> valid;
  double expected = 0;
  for (int w = 0; w < 8; ++w) {
    std::vector<double> p(20), t(20);
    std::vector<bool> m(20);
    for (int k = 0; k < 20; ++k) {
      p[k] = testing::uniform(rng, -1, 1);
      t[k] = testing::uniform(rng, -1, 1);
      m[k] = testing::uniform_int(rng, 0, 4) > 0;
      if (m[k]) expected += (p[k] - t[k]) * (p[k] - t[k]);
    }
    pred.push_back(p);
    target.push_back(t);
    valid.push_back(m);
  }
  EXPECT_NEAR(loss_conf(pred, target, valid), expected, 1e-12);
}

AssessSample sample_of(const Window& w, std::mt19937_64& rng) {
  AssessSample s;
  s.window = w;
  s.frame_width = kMeta.frame_width;
  s.frame_height = kMeta.frame_height;
  for (int k = 0; k < w.length; ++k) s.targets.push_back(w.valid_mask[k] ? testing::uniform(rng, -0.9, 0.9) : 0.0);
  return s;
}

double window_loss(const AssessModel& m, const AssessSample& s) {
  return loss_conf(m.predict_scores(s.window, kMeta), s.targets, s.window.valid_mask);
}

TEST(TrainAssess, OverfitsOneWindow) {
  std::mt19937_64 rng(7);
  AssessModel model(small_config());
  const std::vector<AssessSample> one{sample_of(testing::random_window(rng, 20, 8, Direction::kForward, 20), rng)};
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 1;
  cfg.epochs = 2000;
  cfg.restore_best = false;
  const double before = window_loss(model, one[0]);
  const auto result = train_assess(model, one, one, cfg);
  EXPECT_LE(result.steps, 2000);
  EXPECT_GT(before, 0.1);
  EXPECT_LT(window_loss(model, one[0]), 1e-3);

  // A trained model is sensitive to frame order.
  Window swapped = one[0].window;
  std::swap(swapped.frames[5], swapped.frames[12]);
  const auto a = model.predict_scores(one[0].window, kMeta);
  const auto b = model.predict_scores(swapped, kMeta);
  EXPECT_NE(a[8], b[8]);
}

TEST(TrainAssess, ZeroLearningRateLeavesModelUnchanged) {
  std::mt19937_64 rng(8);
  AssessModel model(small_config());
  std::vector<AssessSample> data;
  for (int i = 0; i < 4; ++i) {
    data.push_back(sample_of(testing::random_window(rng, 20, 8, i % 2 ? Direction::kBackward : Direction::kForward, 20), rng));
  }
  std::vector<nn::Matrix> before;
  for (auto* p : model.net().parameters()) before.push_back(p->value);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.batch_size = 2;
  cfg.epochs = 3;
  const auto result = train_assess(model, data, data, cfg);
  const auto params = model.net().parameters();
  for (std::size_t i = 0; i < params.size(); ++i) EXPECT_EQ(params[i]->value, before[i]) << params[i]->name;
  EXPECT_EQ(result.final_validation_loss, result.initial_validation_loss);
}

TEST(TrainAssess, EmptyDatasetIsRejected) {
  AssessModel model(small_config());
  EXPECT_THROW(train_assess(model, {}, {}, TrainConfig{}), Error);
}

TEST(AssessSamples, TargetsFollowQualityMap) {
  const auto seq = generate_sequence(testing::small_synth(3));
  const auto samples = make_assess_samples(seq.data, 20, 10, QualityMapParams{});
  ASSERT_FALSE(samples.empty());
  for (const auto& s : samples) {
    for (int k = 0; k < 20; ++k) {
      const auto& f = s.window.frames[k];
      if (!s.window.valid_mask[k]) {
        EXPECT_EQ(s.targets[k], 0.0);
        continue;
      }
      EXPECT_DOUBLE_EQ(s.targets[k], quality_from_iou(iou(f.box, seq.data.ground_truth[f.frame_idx])));
    }
  }
  auto no_gt = seq.data;
  no_gt.ground_truth.clear();
  EXPECT_THROW(make_assess_samples(no_gt, 20, 10, QualityMapParams{}), Error);
}

TEST(TrainAssess, ValidationLossDropsOnSyntheticData) {
  std::vector<AssessSample> train, val;
  for (int i = 0; i < 4; ++i) {
    auto part = make_assess_samples(generate_sequence(testing::small_synth(100 + i, 181)).data, 20, 10, {});
    (i < 3 ? train : val).insert((i < 3 ? train : val).end(), part.begin(), part.end());
  }
  AssessModel model(small_config());
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 8;
  const auto result = train_assess(model, train, val, cfg);
  EXPECT_LT(result.best_validation_loss, result.initial_validation_loss);
  // restore_best leaves the best parameters in place.
  EXPECT_NEAR(mean_loss_conf(model, val), result.best_validation_loss, 1e-12);
  EXPECT_EQ(result.validation.size(), 7u);
}

TEST(AssessCheckpoint, RoundTripPreservesScores) {
  testing::TempDir dir;
  AssessModel model(small_config(20, nn::SequenceKind::kDense));
  std::mt19937_64 rng(9);
  const Window w = testing::random_window(rng, 20, 8, Direction::kBackward, 16);
  save_assess(model, dir / "a.ckpt");
  const AssessModel back = load_assess(dir / "a.ckpt");
  EXPECT_EQ(back.config(), model.config());
  EXPECT_EQ(back.predict_scores(w, kMeta), model.predict_scores(w, kMeta));
  try {
    load_assess(dir / "missing.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotFound);
    EXPECT_NE(std::string(e.what()).find("missing.ckpt"), std::string::npos);
  }
  GeometryModel geo(ModelConfig{small_config()});
  save_geometry(geo, dir / "g.ckpt");
  EXPECT_THROW(load_assess(dir / "g.ckpt"), Error);
}

}  // namespace
}  // namespace vidanno
