// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "box_inference.hpp"
#include "common.hpp"
#include "mask_predictor.hpp"
#include "stages.hpp"
#include "test_fixtures.hpp"
#include "test_support.hpp"
#include "vg_refine.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

namespace vidanno {
namespace {

TEST(GaussianWeight, PeakIsExactlyOne) {
  const GaussianParams t{0.3, 0.7, 0.2, 0.4, 3.0};
  EXPECT_EQ(gaussian_weight(t, 0.3, 0.7), 1.0);
}

TEST(GaussianWeight, ReferencePoint) {
  EXPECT_NEAR(gaussian_weight(GaussianParams{0.5, 0.5, 0.25, 0.25, 1.0}, 0.75, 0.5), std::exp(-1.0), 1e-9);
  EXPECT_NEAR(std::exp(-1.0), 0.36788, 1e-5);
}

TEST(GaussianWeight, ZeroAlphaIsFlat) {
  const Mask w = gaussian_weight_map(GaussianParams{0.1, 0.9, 0.01, 5.0, 0.0}, 16, 24);
  EXPECT_EQ(w, Mask::Ones(16, 24));
}

TEST(GaussianWeight, SeparableAndDecaying) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const GaussianParams t{testing::uniform(rng, 0, 1), testing::uniform(rng, 0, 1), testing::uniform(rng, 0.05, 2),
                           testing::uniform(rng, 0.05, 2), testing::uniform(rng, 0, 3)};
    const Mask w = gaussian_weight_map(t, 16, 16);
    for (int i = 0; i < 16; ++i) {
      for (int j = 0; j < 16; ++j) {
        const double x = (j + 0.5) / 16, y = (i + 0.5) / 16;
        const double w1 = gaussian_weight(t, x, t.mu2), w2 = gaussian_weight(t, t.mu1, y);
        ASSERT_NEAR(w(i, j), w1 * w2, 1e-12);
        ASSERT_GT(w(i, j), 0.0);
        ASSERT_LE(w(i, j), 1.0);
      }
    }
    double prev = 1.0;
    for (double x = t.mu1; x <= t.mu1 + 1.0; x += 0.05) {
      const double v = gaussian_weight(t, x, t.mu2);
      ASSERT_LE(v, prev);
      prev = v;
    }
  }
}

TEST(GaussianParams, Invariants) {
  EXPECT_NO_THROW(validate(GaussianParams{0.5, 0.5, 1e-3, 1e-3, 0.0}));
  EXPECT_THROW(validate(GaussianParams{0.5, 0.5, 1e-4, 1.0, 1.0}), Error);
  EXPECT_THROW(validate(GaussianParams{0.5, 0.5, 1.0, 1.0, -0.1}), Error);
  const double zero[5] = {0, 0, 0, 0, 0};
  const auto t = theta_from_raw(zero);
  EXPECT_EQ(t, (GaussianParams{0.5, 0.5, 1.001, 1.001, 1.0}));
}

TEST(ApplyWeight, Examples) {
  std::mt19937_64 rng(2);
  Mask s(8, 8), w(8, 8);
  for (int k = 0; k < 64; ++k) {
    s.data()[k] = testing::uniform(rng, 0, 1);
    w.data()[k] = testing::uniform(rng, 0, 1);
  }
  EXPECT_EQ(apply_weight(s, Mask::Ones(8, 8)), s);
  EXPECT_EQ(apply_weight(Mask::Zero(8, 8), w), Mask::Zero(8, 8));
  const Mask p = apply_weight(s, w);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      EXPECT_EQ(p(i, j), s(i, j) * w(i, j));
      EXPECT_LE(p(i, j), s(i, j));
    }
  }
  EXPECT_THROW(apply_weight(s, Mask::Ones(8, 7)), Error);
}

TEST(ApplyWeightProperty, NeverIncreasesEntries) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const GaussianParams t{testing::uniform(rng, -0.5, 1.5), testing::uniform(rng, -0.5, 1.5),
                           testing::uniform(rng, 1e-3, 3), testing::uniform(rng, 1e-3, 3), testing::uniform(rng, 0, 10)};
    Mask s(12, 10);
    for (int k = 0; k < s.size(); ++k) s.data()[k] = testing::uniform(rng, 0, 1);
    const Mask out = apply_weight(s, gaussian_weight_map(t, 12, 10));
    ASSERT_TRUE((out.array() <= s.array()).all());
    ASSERT_TRUE((out.array() >= 0.0).all());
  }
}

TEST(Aggregate, Examples) {
  EXPECT_EQ(aggregate(Mask::Zero(4, 3), Axis::kHorizontal, Aggregation::kRectified), Eigen::VectorXd::Zero(4));
  Mask m(2, 3);
  m << 0.1, 0.1, 0.1, 0.8, 0.8, 0.8;
  const Eigen::VectorXd h = aggregate(m, Axis::kHorizontal, Aggregation::kRectified);
  EXPECT_NEAR(h(0), 0.3, 1e-15);
  EXPECT_EQ(h(1), 1.0);
  EXPECT_NEAR(aggregate(m, Axis::kHorizontal, Aggregation::kSum)(1), 2.4, 1e-15);
  EXPECT_NEAR(aggregate(m, Axis::kHorizontal, Aggregation::kAverage)(1), 0.8, 1e-15);
  EXPECT_EQ(aggregate(m, Axis::kVertical, Aggregation::kMaxPool)(2), 0.8);
  EXPECT_EQ(aggregate(m, Axis::kHorizontal, Aggregation::kRectifiedMax)(0), 1.0);
  EXPECT_NEAR(aggregate(m, Axis::kVertical, Aggregation::kRectified)(0), 0.9, 1e-15);
  EXPECT_EQ(parse_aggregation("max_pool"), Aggregation::kMaxPool);
  EXPECT_THROW(parse_aggregation("median"), Error);
}

SearchRegion region_16(const BBox& box) { return make_search_region(box, 1000, 1000, 16, 16); }

TEST(BoxMaskProperty, RectifiedProfileIsBinaryIndicator) {
  std::mt19937_64 rng(4);
  const SearchRegion region = region_16(BBox{100, 100, 140, 140});
  for (int rep = 0; rep < 300; ++rep) {
    const double x = testing::uniform(rng, 70, 170), y = testing::uniform(rng, 70, 170);
    const BBox box{x, y, x + testing::uniform(rng, 1, 60), y + testing::uniform(rng, 1, 60)};
    const Mask m = box_mask(region, box);
    const auto h = aggregate(m, Axis::kHorizontal, Aggregation::kRectified);
    const auto v = aggregate(m, Axis::kVertical, Aggregation::kRectified);
    bool any_col = false;
    for (int j = 0; j < 16; ++j) {
      const double cx = region.col_to_x(j + 0.5);
      any_col |= cx >= box.x_min && cx < box.x_max;
    }
    for (int i = 0; i < 16; ++i) {
      const double cy = region.row_to_y(i + 0.5);
      const bool in = cy >= box.y_min && cy < box.y_max;
      ASSERT_EQ(h(i), in && any_col ? 1.0 : 0.0);
    }
    for (int j = 0; j < 16; ++j) ASSERT_TRUE(v(j) == 0.0 || v(j) == 1.0);
  }
}

TEST(ProfileLoss, Examples) {
  const SearchRegion region = region_16(BBox{100, 100, 140, 140});
  const Mask m = box_mask(region, BBox{95, 105, 125, 150});
  EXPECT_EQ(profile_loss(m, m, Aggregation::kRectified), 0.0);
  const auto h = aggregate(m, Axis::kHorizontal, Aggregation::kRectified);
  const auto v = aggregate(m, Axis::kVertical, Aggregation::kRectified);
  const double k = h.sum(), j = v.sum();
  EXPECT_GT(k, 0);
  EXPECT_GT(j, 0);
  EXPECT_EQ(profile_loss(Mask::Zero(16, 16), m, Aggregation::kRectified), k + j);
}

TEST(LossReg, MatchesScalarRecomputation) {
  std::mt19937_64 rng(5);
  std::vector<Mask> pred, target;
  std::vector<bool> valid;
  double expected = 0;
  for (int n = 0; n < 6; ++n) {
    Mask p(5, 7), t = Mask::Zero(5, 7);
    for (int k = 0; k < p.size(); ++k) p.data()[k] = testing::uniform(rng, 0, 0.35);
    for (int i = 1; i < 4; ++i) {
      for (int jj = 2; jj < 6; ++jj) t(i, jj) = 1;
    }
    const bool ok = n != 2;
    if (ok) {
      for (int i = 0; i < 5; ++i) {
        double s = 0, m = 0;
        for (int jj = 0; jj < 7; ++jj) s += p(i, jj), m += t(i, jj);
        expected += std::pow(std::min(1.0, s) - std::min(1.0, m), 2);
      }
      for (int jj = 0; jj < 7; ++jj) {
        double s = 0, m = 0;
        for (int i = 0; i < 5; ++i) s += p(i, jj), m += t(i, jj);
        expected += std::pow(std::min(1.0, s) - std::min(1.0, m), 2);
      }
    }
    pred.push_back(p);
    target.push_back(t);
    valid.push_back(ok);
  }
  EXPECT_NEAR(loss_reg(pred, target, valid), expected, 1e-12);
  EXPECT_THROW(loss_reg(pred, target, std::vector<bool>(3, true)), Error);
}

TEST(SearchRegion, TwiceTheBoxAroundItsCenter) {
  const auto r = make_search_region(BBox{10, 10, 30, 30}, 640, 360);
  EXPECT_EQ(r.center_x, 20);
  EXPECT_EQ(r.center_y, 20);
  EXPECT_EQ(r.width, 40);
  EXPECT_EQ(r.height, 40);
  EXPECT_FALSE(r.clipped);
  EXPECT_THROW(make_search_region(BBox{10, 10, 10, 30}, 640, 360), Error);
}

TEST(SearchRegion, CornerBoxIsClipped) {
  const auto r = make_search_region(BBox{0, 0, 20, 10}, 640, 360);
  EXPECT_TRUE(r.clipped);
  EXPECT_EQ(r.clip, (BBox{0, 0, 30, 15}));
  EXPECT_EQ(r.width, 40);
  EXPECT_EQ(r.x0(), -10);
  EXPECT_DOUBLE_EQ(r.x_to_col(r.col_to_x(5.25)), 5.25);
}

TEST(SearchRegionProperty, SourceBoxCornersRoundTrip) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 500; ++rep) {
    const double x = testing::uniform(rng, -20, 600), y = testing::uniform(rng, -20, 330);
    const BBox b{x, y, x + testing::uniform(rng, 2, 100), y + testing::uniform(rng, 2, 100)};
    const auto r = make_search_region(b, 640, 360, 64, 64);
    // The source box spans grid columns/rows [Q/4, 3Q/4].
    EXPECT_NEAR(r.x_to_col(b.x_min), 16, 1e-9);
    EXPECT_NEAR(r.y_to_row(b.y_max), 48, 1e-9);
    EXPECT_NEAR(r.col_to_x(16), b.x_min, 0.5);
    EXPECT_NEAR(r.row_to_y(16), b.y_min, 0.5);
    EXPECT_NEAR(r.col_to_x(48), b.x_max, 0.5);
    EXPECT_NEAR(r.row_to_y(48), b.y_max, 0.5);
  }
}

ModelConfig geo_config(int length) {
  ModelConfig c;
  c.map_size = 8;
  c.conv_channels = {4, 8};
  c.features = 8;
  c.hidden = 16;
  c.window_length = length;
  c.seed = 9;
  return c;
}

TEST(PredictGeometry, ZeroHeadIsConstant) {
  GeometryModel model(geo_config(10));
  for (auto* p : model.net().predictor(Direction::kForward).head_parameters()) p->value.setZero();
  std::mt19937_64 rng(7);
  const auto meta = testing::toy_meta(100);
  const Window w = testing::random_window(rng, 10, 8, Direction::kForward, 10);
  const auto thetas = model.predict_geometry(w, meta);
  ASSERT_EQ(thetas.size(), 10u);
  for (const auto& t : thetas) EXPECT_EQ(t, theta_from_raw(std::vector<double>(5, 0.0)));
  EXPECT_EQ(model.predict_geometry(w, meta), thetas);
  EXPECT_THROW(model.predict_geometry(testing::random_window(rng, 12, 8, Direction::kForward, 12), meta), Error);
}

// Off-target look-alike: the mask holds the true box plus a faint second
// blob beside it, on a side that depends on the frame. The blob's profile
// stays below 1 (a saturated line carries no gradient under rectified
// accumulation) but above tau, so unweighted decoding absorbs it.
class TwoBlobPredictor : public MaskPredictor {
 public:
  explicit TwoBlobPredictor(std::map<int, BBox> truth) : truth_(std::move(truth)) {}
  Mask predict(const MaskQuery& q) const override {
    const BBox& g = truth_.at(q.frame_idx);
    Mask m = box_mask(q.region, g);
    const double w = g.width(), h = g.height();
    BBox d;
    switch (q.frame_idx % 4) {
      case 0: d = BBox{g.x_max + 0.15 * w, g.center_y() - 0.2 * h, g.x_max + 0.45 * w, g.center_y() + 0.2 * h}; break;
      case 1: d = BBox{g.x_min - 0.45 * w, g.center_y() - 0.2 * h, g.x_min - 0.15 * w, g.center_y() + 0.2 * h}; break;
      case 2: d = BBox{g.center_x() - 0.2 * w, g.y_max + 0.15 * h, g.center_x() + 0.2 * w, g.y_max + 0.45 * h}; break;
      default: d = BBox{g.center_x() - 0.2 * w, g.y_min - 0.45 * h, g.center_x() + 0.2 * w, g.y_min - 0.15 * h};
    }
    m += 0.25 * box_mask(q.region, d);
    return m;
  }
  std::string name() const override { return "two-blob"; }

 private:
  std::map<int, BBox> truth_;
};

struct BlobData {
  VideoContext video;
  std::map<int, BBox> truth;
  std::vector<RefineSample> samples;
};

// Tracker boxes equal the truth, so targets sit at the region center.
std::unique_ptr<BlobData> blob_data(int windows, int length, std::uint64_t seed) {
  auto data = std::make_unique<BlobData>();
  data->video.meta = testing::toy_meta(windows * length, 640, 480);
  std::mt19937_64 rng(seed);
  int idx = 0;
  for (int w = 0; w < windows; ++w) {
    std::vector<TrackedFrame> frames;
    for (int k = 0; k < length; ++k, ++idx) {
      const double x = testing::uniform(rng, 100, 450), y = testing::uniform(rng, 100, 330);
      const BBox g{x, y, x + testing::uniform(rng, 30, 80), y + testing::uniform(rng, 30, 80)};
      data->truth[idx] = g;
      TrackedFrame f = testing::toy_frame(idx, w % 2 ? Direction::kBackward : Direction::kForward);
      f.box = g;
      frames.push_back(f);
    }
    RefineSample s;
    s.window = make_windows(frames, length, length).front();
    for (const auto& f : frames) s.ground_truth.push_back(data->truth[f.frame_idx]);
    data->samples.push_back(std::move(s));
  }
  for (auto& s : data->samples) s.video = &data->video;
  return data;
}

RefineTrainConfig blob_train(int epochs, double lr) {
  RefineTrainConfig c;
  c.rows = c.cols = 16;
  c.train.learning_rate = lr;
  c.train.batch_size = 4;
  c.train.epochs = epochs;
  c.train.restore_best = false;
  return c;
}

TEST(TrainRefine, OverfitsOneWindow) {
  const auto data = blob_data(1, 5, 11);
  const TwoBlobPredictor predictor(data->truth);
  GeometryModel model(geo_config(5));
  auto cfg = blob_train(3000, 1e-2);
  cfg.train.batch_size = 1;
  const double before = mean_loss_reg(model, data->samples, predictor, cfg);
  const auto result = train_refine(model, data->samples, data->samples, predictor, cfg);
  const double after = mean_loss_reg(model, data->samples, predictor, cfg);
  EXPECT_GT(before, 0.5);
  EXPECT_LE(after, 0.1 * before) << "before " << before << " after " << after;
  EXPECT_LE(result.steps, 3000);
  // Decreasing on average: the last tenth of the curve sits well below the first.
  const auto& c = result.curve;
  double head = 0, tail = 0;
  const std::size_t n = c.size() / 10;
  for (std::size_t i = 0; i < n; ++i) head += c[i].loss, tail += c[c.size() - 1 - i].loss;
  EXPECT_LT(tail, head);
}

TEST(TrainRefine, ZeroLearningRateLeavesLossUnchanged) {
  const auto data = blob_data(4, 5, 12);
  const TwoBlobPredictor predictor(data->truth);
  GeometryModel model(geo_config(5));
  const auto cfg = blob_train(2, 0.0);
  const double before = mean_loss_reg(model, data->samples, predictor, cfg);
  const auto result = train_refine(model, data->samples, data->samples, predictor, cfg);
  EXPECT_EQ(mean_loss_reg(model, data->samples, predictor, cfg), before);
  EXPECT_EQ(result.final_validation_loss, result.initial_validation_loss);
  EXPECT_THROW(train_refine(model, {}, {}, predictor, cfg), Error);
}

// Centered targets with distractors on all four sides: the learned prior
// stays centered and the weighted masks decode to better boxes than the raw
// masks do.
TEST(TrainRefine, CenteredPriorSuppressesDistractor) {
  const auto train = blob_data(48, 5, 13);
  const auto test = blob_data(16, 5, 14);
  const TwoBlobPredictor train_pred(train->truth), test_pred(test->truth);
  GeometryModel model(geo_config(5));
  const auto cfg = blob_train(25, 1e-2);
  train_refine(model, train->samples, train->samples, train_pred, cfg);

  double mu1 = 0, mu2 = 0, v_iou = 0, vg_iou = 0;
  int n = 0;
  for (const auto& s : test->samples) {
    const auto thetas = model.predict_geometry(s.window, test->video.meta);
    for (int t = 0; t < 5; ++t) {
      const auto& f = s.window.frames[t];
      const auto region = make_search_region(f.box, 640, 480, 16, 16);
      const Mask initial = test_pred.predict(MaskQuery{test->video, f.frame_idx, f.direction, region});
      const auto v = refine_box(initial, region, InferenceConfig{});
      const auto vg = refine_box(apply_weight(initial, gaussian_weight_map(thetas[t], 16, 16)), region, InferenceConfig{});
      v_iou += v ? iou(*v, s.ground_truth[t]) : 0.0;
      vg_iou += vg ? iou(*vg, s.ground_truth[t]) : 0.0;
      mu1 += thetas[t].mu1;
      mu2 += thetas[t].mu2;
      ++n;
    }
  }
  EXPECT_NEAR(mu1 / n, 0.5, 0.1);
  EXPECT_NEAR(mu2 / n, 0.5, 0.1);
  EXPECT_GT(vg_iou / n, v_iou / n + 0.05) << "V " << v_iou / n << " VG " << vg_iou / n;
}

TEST(GeometryCheckpoint, RoundTrip) {
  testing::TempDir dir;
  GeometryModel model(geo_config(5));
  std::mt19937_64 rng(15);
  const Window w = testing::random_window(rng, 5, 8, Direction::kBackward, 4);
  const auto meta = testing::toy_meta(100);
  save_geometry(model, dir / "g.ckpt");
  EXPECT_EQ(load_geometry(dir / "g.ckpt").predict_geometry(w, meta), model.predict_geometry(w, meta));
}

}  // namespace
}  // namespace vidanno
