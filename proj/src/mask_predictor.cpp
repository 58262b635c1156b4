// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "mask_predictor.hpp"

#include "common.hpp"
#include "sequence_model.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>

namespace vidanno {

using nn::Matrix;

Mask OracleMaskPredictor::predict(const MaskQuery& q) const {
  if (!q.video.scene) throw_invalid("the oracle mask predictor needs a synthetic scene");
  const auto& scene = *q.video.scene;
  const auto& r = q.region;
  const std::uint64_t salt = static_cast<std::uint64_t>(index_of(q.direction)) + 1;
  Mask m(r.rows, r.cols);
  for (int i = 0; i < r.rows; ++i) {
    const double y = r.row_to_y(i + 0.5);
    for (int j = 0; j < r.cols; ++j) m(i, j) = scene.mask_value(q.frame_idx, r.col_to_x(j + 0.5), y, salt);
  }
  return m;
}

int template_frame(const VideoContext& video, int frame_idx, Direction direction) {
  if (video.manual.empty()) throw_invalid(video.meta.video_id + ": no manual boxes for a template");
  if (direction == Direction::kForward) {
    auto it = video.manual.upper_bound(frame_idx);
    if (it == video.manual.begin()) return it->first;
    return std::prev(it)->first;
  }
  auto it = video.manual.lower_bound(frame_idx);
  if (it == video.manual.end()) return std::prev(it)->first;
  return it->first;
}

ConvMaskPredictor::ConvMaskPredictor(int channels, std::uint64_t seed) : channels_(channels) {
  if (channels < 1) throw_invalid("mask predictor needs at least one channel");
  layers_.emplace_back("mask.conv0", 2, channels, 3, 1, 1, nn::Activation::kRelu);
  layers_.emplace_back("mask.conv1", channels, channels, 3, 1, 1, nn::Activation::kRelu);
  layers_.emplace_back("mask.conv2", channels, 1, 3, 1, 1, nn::Activation::kNone);
  std::mt19937_64 rng(seed);
  for (auto& l : layers_) l.init(rng);
}

nn::ParameterRefs ConvMaskPredictor::parameters() {
  nn::ParameterRefs out;
  for (auto& l : layers_) {
    for (auto* p : l.parameters()) out.push_back(p);
  }
  return out;
}

Matrix ConvMaskPredictor::input(const MaskQuery& q) const {
  if (!q.video.frames) throw_invalid("the conv mask predictor needs frame images");
  const auto& r = q.region;
  if (r.rows != r.cols) throw_invalid("the conv mask predictor needs a square mask grid");
  const Image search = q.video.frames->crop(q.frame_idx, r.x0(), r.y0(), r.x0() + r.width, r.y0() + r.height, r.rows);
  const int tf = template_frame(q.video, q.frame_idx, q.direction);
  const SearchRegion tr =
      make_search_region(q.video.manual.at(tf), q.video.meta.frame_width, q.video.meta.frame_height, r.rows, r.cols);
  const Image tmpl = q.video.frames->crop(tf, tr.x0(), tr.y0(), tr.x0() + tr.width, tr.y0() + tr.height, r.rows);
  Matrix x(2, r.rows * r.cols);
  for (int k = 0; k < r.rows * r.cols; ++k) {
    x(0, k) = search.pixels[k];
    x(1, k) = tmpl.pixels[k];
  }
  return x;
}

Matrix ConvMaskPredictor::logits(const Matrix& input, int rows, int cols, std::vector<nn::Conv2d::Cache>* caches) const {
  Matrix x = input;
  if (caches) caches->assign(layers_.size(), {});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i].forward(x, 1, rows, cols, caches ? &(*caches)[i] : nullptr);
  }
  return x;
}

void ConvMaskPredictor::backward(const Matrix& d_logits, const std::vector<nn::Conv2d::Cache>& caches) {
  Matrix d = d_logits;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) d = layers_[i].backward(d, caches[i]);
}

Mask ConvMaskPredictor::predict(const MaskQuery& q) const {
  const Matrix z = logits(input(q), q.region.rows, q.region.cols, nullptr);
  const Matrix s = nn::sigmoid(z);
  Mask m(q.region.rows, q.region.cols);
  for (int i = 0; i < q.region.rows; ++i) {
    for (int j = 0; j < q.region.cols; ++j) m(i, j) = s(0, i * q.region.cols + j);
  }
  return m;
}

void ConvMaskPredictor::save(const std::filesystem::path& path) {
  CheckpointInfo info;
  info.kind = "mask";
  info.metadata_json = nlohmann::json{{"channels", channels_}}.dump();
  save_checkpoint(path, info, parameters());
}

ConvMaskPredictor ConvMaskPredictor::load(const std::filesystem::path& path) {
  const CheckpointInfo info = read_checkpoint_info(path);
  if (info.kind != "mask") throw_format(path.string() + ": not a mask predictor checkpoint");
  int channels = 0;
  try {
    channels = nlohmann::json::parse(info.metadata_json).at("channels").get<int>();
  } catch (const std::exception& e) {
    throw_format(path.string() + ": mask checkpoint metadata: " + e.what());
  }
  ConvMaskPredictor model(channels);
  load_checkpoint_values(path, model.parameters());
  return model;
}

namespace {

Mask to_mask(const Matrix& row, int rows, int cols) {
  Mask m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = row(0, i * cols + j);
  }
  return m;
}

}  // namespace

std::vector<MaskTrainItem> mask_items_from(std::span<const RefineSample> samples, int stride) {
  if (stride < 1) throw_invalid("mask item stride must be positive");
  std::vector<MaskTrainItem> out;
  long long k = 0;
  for (const auto& s : samples) {
    for (int t = 0; t < s.window.length; ++t) {
      if (!s.window.valid_mask[t]) continue;
      if (k++ % stride != 0) continue;
      const auto& f = s.window.frames[t];
      out.push_back({s.video, f.frame_idx, f.direction, f.box, s.ground_truth[t]});
    }
  }
  return out;
}

TrainResult train_mask_predictor(ConvMaskPredictor& model, std::span<const MaskTrainItem> train,
                                 std::span<const MaskTrainItem> validation, const TrainConfig& cfg,
                                 Aggregation aggregation, int rows, int cols) {
  if (train.empty()) throw_invalid("train_mask_predictor: empty dataset");
  // Loss of one item; with `d_z` set, also the logit gradient and layer caches.
  auto item_loss = [&](const MaskTrainItem& it, Matrix* d_z, std::vector<nn::Conv2d::Cache>* caches) {
    const SearchRegion region =
        make_search_region(it.tracker_box, it.video->meta.frame_width, it.video->meta.frame_height, rows, cols);
    const MaskQuery q{*it.video, it.frame_idx, it.direction, region};
    const Matrix s = nn::sigmoid(model.logits(model.input(q), rows, cols, caches));
    const Mask target = box_mask(region, it.ground_truth);
    Mask d_s;
    const double loss = profile_loss(to_mask(s, rows, cols), target, aggregation, d_z ? &d_s : nullptr);
    if (d_z) {
      d_z->resize(1, rows * cols);
      for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
          const double v = s(0, i * cols + j);
          (*d_z)(0, i * cols + j) = d_s(i, j) * v * (1 - v);
        }
      }
    }
    return loss;
  };
  std::vector<std::vector<std::size_t>> groups(1);
  for (std::size_t i = 0; i < train.size(); ++i) groups[0].push_back(i);
  auto loss_fn = [&](std::span<const std::size_t> idx) {
    double total = 0.0;
    const double n = static_cast<double>(idx.size());
    for (auto i : idx) {
      Matrix d_z;
      std::vector<nn::Conv2d::Cache> caches;
      total += item_loss(train[i], &d_z, &caches);
      model.backward(d_z / n, caches);
    }
    return total / n;
  };
  auto eval_fn = [&] {
    if (validation.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (const auto& it : validation) total += item_loss(it, nullptr, nullptr);
    return total / static_cast<double>(validation.size());
  };
  return run_training(model.parameters(), groups, loss_fn, eval_fn, cfg);
}

}  // namespace vidanno
