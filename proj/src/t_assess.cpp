// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "t_assess.hpp"

#include "common.hpp"

#include <cmath>
#include <limits>

namespace vidanno {

using nn::Matrix;

AssessModel::AssessModel(ModelConfig cfg) : net_([&] {
  cfg.outputs = 1;
  return cfg;
}()) {}

std::vector<double> AssessModel::extract_feature(const TrackedFrame& frame, const VideoMeta& meta) const {
  Window w;
  w.length = 1;
  w.direction = frame.direction;
  w.frames = {frame};
  w.valid_mask = {true};
  const BatchItem item{&w, meta.frame_width, meta.frame_height};
  const FrameBatch fb = make_frame_batch(std::span<const BatchItem>(&item, 1), config().map_size);
  const Matrix f = net_.features(fb, nullptr);
  return std::vector<double>(f.data(), f.data() + f.size());
}

std::vector<double> AssessModel::predict_scores(const Window& window, const VideoMeta& meta) const {
  const BatchItem item{&window, meta.frame_width, meta.frame_height};
  return predict_scores(std::span<const BatchItem>(&item, 1)).front();
}

std::vector<std::vector<double>> AssessModel::predict_scores(std::span<const BatchItem> items) const {
  if (items.empty()) return {};
  const Direction d = items.front().window->direction;
  for (const auto& it : items) {
    if (it.window->direction != d) throw_invalid("a score batch must hold one direction");
  }
  const FrameBatch fb = make_frame_batch(items, config().map_size);
  const Matrix out = net_.forward(fb, d, nullptr);
  std::vector<std::vector<double>> scores(fb.batch, std::vector<double>(fb.steps));
  for (int t = 0; t < fb.steps; ++t) {
    for (int b = 0; b < fb.batch; ++b) scores[b][t] = out(0, t * fb.batch + b);
  }
  return scores;
}

double loss_conf(std::span<const double> pred, std::span<const double> target, const std::vector<bool>& valid,
                 std::vector<double>* grad) {
  if (pred.size() != target.size() || pred.size() != valid.size()) {
    throw_invalid("loss_conf: " + std::to_string(pred.size()) + " predictions, " +
                  std::to_string(target.size()) + " targets, " + std::to_string(valid.size()) + " mask entries");
  }
  if (grad) grad->assign(pred.size(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!valid[i]) continue;
    const double r = pred[i] - target[i];
    loss += r * r;
    if (grad) (*grad)[i] = 2.0 * r;
  }
  return loss;
}

double loss_conf(std::span<const std::vector<double>> pred, std::span<const std::vector<double>> target,
                 std::span<const std::vector<bool>> valid) {
  if (pred.size() != target.size() || pred.size() != valid.size()) {
    throw_invalid("loss_conf: window counts differ");
  }
  double loss = 0.0;
  for (std::size_t w = 0; w < pred.size(); ++w) {
    try {
      loss += loss_conf(pred[w], target[w], valid[w]);
    } catch (const Error& e) {
      throw_invalid("window " + std::to_string(w) + ": " + e.what());
    }
  }
  return loss;
}

std::vector<AssessSample> make_assess_samples(const SequenceData& data, int length, int stride,
                                              const QualityMapParams& quality) {
  if (!data.has_ground_truth()) throw_invalid(data.meta.video_id + ": quality targets need ground truth");
  std::vector<AssessSample> out;
  const auto snippets = snippets_of(data);
  for (auto& sw : window_snippets(snippets, length, stride)) {
    for (auto& w : sw.windows) {
      AssessSample s;
      s.frame_width = data.meta.frame_width;
      s.frame_height = data.meta.frame_height;
      s.targets.assign(w.length, 0.0);
      for (int t = 0; t < w.length; ++t) {
        if (!w.valid_mask[t]) continue;
        const auto& f = w.frames[t];
        s.targets[t] = quality_from_iou(iou(f.box, data.ground_truth[f.frame_idx]), quality);
      }
      s.window = std::move(w);
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::vector<BatchItem> items_of(std::span<const AssessSample> samples, std::span<const std::size_t> idx) {
  std::vector<BatchItem> items;
  items.reserve(idx.size());
  for (auto i : idx) items.push_back({&samples[i].window, samples[i].frame_width, samples[i].frame_height});
  return items;
}

// Loss summed over valid slots; fills d_out when non-null.
double batch_loss(const FrameBatch& fb, const Matrix& out, std::span<const AssessSample> samples,
                  std::span<const std::size_t> idx, Matrix* d_out, int* valid_count) {
  double loss = 0.0;
  int n = 0;
  if (d_out) d_out->setZero(1, out.cols());
  for (int t = 0; t < fb.steps; ++t) {
    for (int b = 0; b < fb.batch; ++b) {
      const int col = t * fb.batch + b;
      if (!fb.valid[col]) continue;
      const double r = out(0, col) - samples[idx[b]].targets[t];
      loss += r * r;
      ++n;
      if (d_out) (*d_out)(0, col) = 2.0 * r;
    }
  }
  *valid_count = n;
  return loss;
}

std::vector<std::vector<std::size_t>> direction_groups(std::span<const AssessSample> samples) {
  std::vector<std::vector<std::size_t>> groups(2);
  for (std::size_t i = 0; i < samples.size(); ++i) groups[index_of(samples[i].window.direction)].push_back(i);
  return groups;
}

}  // namespace

double mean_loss_conf(const AssessModel& model, std::span<const AssessSample> samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  constexpr std::size_t kChunk = 64;
  double loss = 0.0;
  long long n = 0;
  for (const auto& group : direction_groups(samples)) {
    for (std::size_t i = 0; i < group.size(); i += kChunk) {
      const std::span<const std::size_t> idx(group.data() + i, std::min(kChunk, group.size() - i));
      const auto items = items_of(samples, idx);
      const FrameBatch fb = make_frame_batch(std::span<const BatchItem>(items), model.config().map_size);
      const Matrix out = model.net().forward(fb, samples[idx[0]].window.direction, nullptr);
      int count = 0;
      loss += batch_loss(fb, out, samples, idx, nullptr, &count);
      n += count;
    }
  }
  return n > 0 ? loss / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

TrainResult train_assess(AssessModel& model, std::span<const AssessSample> train,
                         std::span<const AssessSample> validation, const TrainConfig& cfg) {
  if (train.empty()) throw_invalid("train_assess: empty dataset");
  for (const auto& s : train) {
    if (s.window.length != model.config().window_length) {
      throw_invalid("train_assess: window length " + std::to_string(s.window.length) + " does not match model");
    }
  }
  auto& net = model.net();
  auto loss_fn = [&](std::span<const std::size_t> idx) {
    const auto items = items_of(train, idx);
    const FrameBatch fb = make_frame_batch(std::span<const BatchItem>(items), model.config().map_size);
    const Direction d = train[idx[0]].window.direction;
    DirectionalModel::Cache cache;
    const Matrix out = net.forward(fb, d, &cache);
    Matrix d_out;
    int n = 0;
    const double loss = batch_loss(fb, out, train, idx, &d_out, &n);
    if (n == 0) return 0.0;
    d_out /= n;
    net.backward(d_out, d, cache);
    return loss / n;
  };
  auto eval_fn = [&] { return mean_loss_conf(model, validation); };
  return run_training(net.parameters(), direction_groups(train), loss_fn, eval_fn, cfg);
}

}  // namespace vidanno
