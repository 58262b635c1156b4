// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "vg_refine.hpp"

#include "common.hpp"
#include "mask_predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vidanno {

using nn::Matrix;

SearchRegion make_search_region(const BBox& box, int frame_width, int frame_height, int rows, int cols) {
  if (!box.valid()) throw_invalid("degenerate box for search region");
  if (rows < 1 || cols < 1) throw_invalid("mask grid must be at least 1x1");
  SearchRegion r;
  r.source_box = box;
  r.center_x = box.center_x();
  r.center_y = box.center_y();
  r.width = 2 * box.width();
  r.height = 2 * box.height();
  r.rows = rows;
  r.cols = cols;
  const double x0 = r.x0(), y0 = r.y0(), x1 = x0 + r.width, y1 = y0 + r.height;
  r.clip = BBox{std::max(0.0, x0), std::max(0.0, y0), std::min<double>(frame_width, x1),
                std::min<double>(frame_height, y1)};
  r.clipped = x0 < 0 || y0 < 0 || x1 > frame_width || y1 > frame_height;
  return r;
}

RegionCrop crop_search_region(const FrameSource& frames, int frame_idx, const BBox& box, const VideoMeta& meta,
                              int rows, int cols, int crop_size) {
  if (crop_size < 1) throw_invalid("crop size must be positive");
  RegionCrop out;
  out.region = make_search_region(box, meta.frame_width, meta.frame_height, rows, cols);
  const auto& r = out.region;
  out.image = frames.crop(frame_idx, r.x0(), r.y0(), r.x0() + r.width, r.y0() + r.height, crop_size);
  return out;
}

void validate(const GaussianParams& t) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(t.mu1) || !finite(t.mu2) || !finite(t.sigma1) || !finite(t.sigma2) || !finite(t.alpha)) {
    throw_invalid("Gaussian parameters must be finite");
  }
  if (t.sigma1 < 1e-3 || t.sigma2 < 1e-3) throw_invalid("Gaussian sigma must be at least 1e-3");
  if (t.alpha < 0) throw_invalid("Gaussian alpha must be non-negative");
}

double gaussian_weight(const GaussianParams& t, double x, double y) {
  const double dx = (x - t.mu1) / t.sigma1, dy = (y - t.mu2) / t.sigma2;
  return std::exp(-t.alpha * (dx * dx + dy * dy));
}

Mask gaussian_weight_map(const GaussianParams& t, int rows, int cols) {
  Mask w(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) w(i, j) = gaussian_weight(t, (j + 0.5) / cols, (i + 0.5) / rows);
  }
  return w;
}

Mask apply_weight(const Mask& initial, const Mask& weight) {
  if (initial.rows() != weight.rows() || initial.cols() != weight.cols()) {
    throw_invalid("weight map " + std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()) +
                  " does not match mask " + std::to_string(initial.rows()) + "x" + std::to_string(initial.cols()));
  }
  return initial.cwiseProduct(weight);
}

const char* to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kRectified: return "rectified";
    case Aggregation::kRectifiedMax: return "rectified_max";
    case Aggregation::kMaxPool: return "max_pool";
    case Aggregation::kAverage: return "average";
    case Aggregation::kSum: return "sum";
  }
  return "?";
}

Aggregation parse_aggregation(const std::string& s) {
  for (auto a : {Aggregation::kRectified, Aggregation::kRectifiedMax, Aggregation::kMaxPool, Aggregation::kAverage,
                 Aggregation::kSum}) {
    if (s == to_string(a)) return a;
  }
  throw_invalid("unknown aggregation '" + s + "' (rectified, rectified_max, max_pool, average, sum)");
}

namespace {

// The k-th line of the mask along `axis`: row k (horizontal) or column k (vertical).
auto line_of(const Mask& m, Axis axis, int k) {
  return axis == Axis::kHorizontal ? Eigen::VectorXd(m.row(k).transpose()) : Eigen::VectorXd(m.col(k));
}

}  // namespace

Eigen::VectorXd aggregate(const Mask& mask, Axis axis, Aggregation op) {
  const int n = static_cast<int>(axis == Axis::kHorizontal ? mask.rows() : mask.cols());
  Eigen::VectorXd out(n);
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd line = line_of(mask, axis, k);
    switch (op) {
      case Aggregation::kRectified: out(k) = std::min(1.0, line.sum()); break;
      case Aggregation::kRectifiedMax: out(k) = std::max(1.0, line.sum()); break;
      case Aggregation::kMaxPool: out(k) = line.size() ? line.maxCoeff() : 0.0; break;
      case Aggregation::kAverage: out(k) = line.size() ? line.mean() : 0.0; break;
      case Aggregation::kSum: out(k) = line.sum(); break;
    }
  }
  return out;
}

Mask aggregate_backward(const Mask& mask, Axis axis, Aggregation op, const Eigen::VectorXd& d_profile) {
  Mask d = Mask::Zero(mask.rows(), mask.cols());
  const bool horiz = axis == Axis::kHorizontal;
  const int n = static_cast<int>(horiz ? mask.rows() : mask.cols());
  const int len = static_cast<int>(horiz ? mask.cols() : mask.rows());
  if (d_profile.size() != n) throw_invalid("profile gradient length mismatch");
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd line = line_of(mask, axis, k);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(len);
    switch (op) {
      case Aggregation::kRectified:
        if (line.sum() < 1.0) g.setOnes();
        break;
      case Aggregation::kRectifiedMax:
        if (line.sum() > 1.0) g.setOnes();
        break;
      case Aggregation::kMaxPool:
        if (len > 0) {
          Eigen::Index arg = 0;
          line.maxCoeff(&arg);
          g(arg) = 1.0;
        }
        break;
      case Aggregation::kAverage:
        if (len > 0) g.setConstant(1.0 / len);
        break;
      case Aggregation::kSum:
        g.setOnes();
        break;
    }
    g *= d_profile(k);
    if (horiz) {
      d.row(k) = g.transpose();
    } else {
      d.col(k) = g;
    }
  }
  return d;
}

Mask box_mask(const SearchRegion& region, const BBox& box) {
  Mask m(region.rows, region.cols);
  for (int i = 0; i < region.rows; ++i) {
    const double y = region.row_to_y(i + 0.5);
    const bool in_y = y >= box.y_min && y < box.y_max;
    for (int j = 0; j < region.cols; ++j) {
      const double x = region.col_to_x(j + 0.5);
      m(i, j) = in_y && x >= box.x_min && x < box.x_max ? 1.0 : 0.0;
    }
  }
  return m;
}

double profile_loss(const Mask& pred, const Mask& target, Aggregation op, Mask* d_pred) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw_invalid("predicted and box masks differ in shape");
  }
  const Eigen::VectorXd sh = aggregate(pred, Axis::kHorizontal, op);
  const Eigen::VectorXd mh = aggregate(target, Axis::kHorizontal, op);
  const Eigen::VectorXd sv = aggregate(pred, Axis::kVertical, op);
  const Eigen::VectorXd mv = aggregate(target, Axis::kVertical, op);
  const double loss = (sv - mv).squaredNorm() + (sh - mh).squaredNorm();
  if (d_pred) {
    *d_pred = aggregate_backward(pred, Axis::kHorizontal, op, 2.0 * (sh - mh)) +
              aggregate_backward(pred, Axis::kVertical, op, 2.0 * (sv - mv));
  }
  return loss;
}

double loss_reg(std::span<const Mask> pred, std::span<const Mask> target, const std::vector<bool>& valid,
                Aggregation op) {
  if (pred.size() != target.size() || pred.size() != valid.size()) {
    throw_invalid("loss_reg: " + std::to_string(pred.size()) + " masks, " + std::to_string(target.size()) +
                  " box masks, " + std::to_string(valid.size()) + " mask entries");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (valid[i]) loss += profile_loss(pred[i], target[i], op);
  }
  return loss;
}

double weighted_profile_loss(const Mask& initial, const GaussianParams& t, const Mask& target, Aggregation op,
                             ThetaGrad* d_theta) {
  const int rows = static_cast<int>(initial.rows()), cols = static_cast<int>(initial.cols());
  const Mask w = gaussian_weight_map(t, rows, cols);
  const Mask s = apply_weight(initial, w);
  Mask d_s;
  const double loss = profile_loss(s, target, op, d_theta ? &d_s : nullptr);
  if (d_theta) {
    d_theta->fill(0.0);
    const Mask g = d_s.cwiseProduct(initial).cwiseProduct(w);  // dL/dW * W
    const double s1 = t.sigma1 * t.sigma1, s2 = t.sigma2 * t.sigma2;
    for (int i = 0; i < rows; ++i) {
      const double dy = (i + 0.5) / rows - t.mu2;
      for (int j = 0; j < cols; ++j) {
        const double gij = g(i, j);
        if (gij == 0.0) continue;
        const double dx = (j + 0.5) / cols - t.mu1;
        (*d_theta)[0] += gij * 2 * t.alpha * dx / s1;
        (*d_theta)[1] += gij * 2 * t.alpha * dy / s2;
        (*d_theta)[2] += gij * 2 * t.alpha * dx * dx / (s1 * t.sigma1);
        (*d_theta)[3] += gij * 2 * t.alpha * dy * dy / (s2 * t.sigma2);
        (*d_theta)[4] -= gij * (dx * dx / s1 + dy * dy / s2);
      }
    }
  }
  return loss;
}

GaussianParams theta_from_raw(std::span<const double> raw) {
  if (raw.size() != 5) throw_invalid("geometry head must emit 5 values");
  auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  return GaussianParams{sig(raw[0]), sig(raw[1]), 1e-3 + std::exp(raw[2]), 1e-3 + std::exp(raw[3]),
                        std::exp(raw[4])};
}

std::array<double, 5> raw_gradient(std::span<const double> raw, const ThetaGrad& d) {
  const GaussianParams t = theta_from_raw(raw);
  return {d[0] * t.mu1 * (1 - t.mu1), d[1] * t.mu2 * (1 - t.mu2), d[2] * (t.sigma1 - 1e-3),
          d[3] * (t.sigma2 - 1e-3), d[4] * t.alpha};
}

GeometryModel::GeometryModel(ModelConfig cfg) : net_([&] {
  cfg.outputs = 5;
  return cfg;
}()) {}

std::vector<GaussianParams> GeometryModel::predict_geometry(const Window& window, const VideoMeta& meta) const {
  const BatchItem item{&window, meta.frame_width, meta.frame_height};
  return predict_geometry(std::span<const BatchItem>(&item, 1)).front();
}

std::vector<std::vector<GaussianParams>> GeometryModel::predict_geometry(std::span<const BatchItem> items) const {
  if (items.empty()) return {};
  const Direction d = items.front().window->direction;
  for (const auto& it : items) {
    if (it.window->direction != d) throw_invalid("a geometry batch must hold one direction");
  }
  const FrameBatch fb = make_frame_batch(items, config().map_size);
  const Matrix out = net_.forward(fb, d, nullptr);
  std::vector<std::vector<GaussianParams>> thetas(fb.batch, std::vector<GaussianParams>(fb.steps));
  for (int t = 0; t < fb.steps; ++t) {
    for (int b = 0; b < fb.batch; ++b) {
      const Eigen::VectorXd raw = out.col(t * fb.batch + b);
      thetas[b][t] = theta_from_raw(std::span<const double>(raw.data(), 5));
    }
  }
  return thetas;
}

std::vector<RefineSample> make_refine_samples(const SequenceData& data, const VideoContext* video, int length,
                                              int stride) {
  if (!data.has_ground_truth()) throw_invalid(data.meta.video_id + ": refinement training needs ground truth");
  std::vector<RefineSample> out;
  for (auto& sw : window_snippets(snippets_of(data), length, stride)) {
    for (auto& w : sw.windows) {
      RefineSample s;
      s.video = video;
      for (const auto& f : w.frames) s.ground_truth.push_back(data.ground_truth[f.frame_idx]);
      s.window = std::move(w);
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

std::vector<BatchItem> items_of(std::span<const RefineSample> samples, std::span<const std::size_t> idx) {
  std::vector<BatchItem> items;
  items.reserve(idx.size());
  for (auto i : idx) {
    const auto& m = samples[i].video->meta;
    items.push_back({&samples[i].window, m.frame_width, m.frame_height});
  }
  return items;
}

// Summed loss over valid slots; with d_out set, the raw-output gradient.
double refine_batch_loss(const FrameBatch& fb, const Matrix& out, std::span<const RefineSample> samples,
                         std::span<const std::size_t> idx, const MaskPredictor& predictor,
                         const RefineTrainConfig& cfg, Matrix* d_out, int* valid_count) {
  double loss = 0.0;
  int n = 0;
  if (d_out) d_out->setZero(out.rows(), out.cols());
  for (int t = 0; t < fb.steps; ++t) {
    for (int b = 0; b < fb.batch; ++b) {
      const int col = t * fb.batch + b;
      if (!fb.valid[col]) continue;
      const RefineSample& s = samples[idx[b]];
      const TrackedFrame& f = s.window.frames[t];
      const SearchRegion region =
          make_search_region(f.box, s.video->meta.frame_width, s.video->meta.frame_height, cfg.rows, cfg.cols);
      const Mask initial = predictor.predict(MaskQuery{*s.video, f.frame_idx, f.direction, region});
      const Mask target = box_mask(region, s.ground_truth[t]);
      const Eigen::VectorXd raw = out.col(col);
      const std::span<const double> r(raw.data(), 5);
      ThetaGrad dt;
      loss += weighted_profile_loss(initial, theta_from_raw(r), target, cfg.aggregation, d_out ? &dt : nullptr);
      ++n;
      if (d_out) {
        const auto dr = raw_gradient(r, dt);
        for (int k = 0; k < 5; ++k) (*d_out)(k, col) = dr[k];
      }
    }
  }
  *valid_count = n;
  return loss;
}

std::vector<std::vector<std::size_t>> direction_groups(std::span<const RefineSample> samples) {
  std::vector<std::vector<std::size_t>> groups(2);
  for (std::size_t i = 0; i < samples.size(); ++i) groups[index_of(samples[i].window.direction)].push_back(i);
  return groups;
}

}  // namespace

double mean_loss_reg(const GeometryModel& model, std::span<const RefineSample> samples, const MaskPredictor& predictor,
                     const RefineTrainConfig& cfg) {
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
      loss += refine_batch_loss(fb, out, samples, idx, predictor, cfg, nullptr, &count);
      n += count;
    }
  }
  return n > 0 ? loss / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

TrainResult train_refine(GeometryModel& model, std::span<const RefineSample> train,
                         std::span<const RefineSample> validation, const MaskPredictor& predictor,
                         const RefineTrainConfig& cfg) {
  if (train.empty()) throw_invalid("train_refine: empty dataset");
  for (const auto& s : train) {
    if (!s.video) throw_invalid("train_refine: sample without video context");
    if (s.window.length != model.config().window_length) {
      throw_invalid("train_refine: window length " + std::to_string(s.window.length) + " does not match model");
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
    const double loss = refine_batch_loss(fb, out, train, idx, predictor, cfg, &d_out, &n);
    if (n == 0) return 0.0;
    d_out /= n;
    net.backward(d_out, d, cache);
    return loss / n;
  };
  auto eval_fn = [&] { return mean_loss_reg(model, validation, predictor, cfg); };
  return run_training(net.parameters(), direction_groups(train), loss_fn, eval_fn, cfg.train);
}

}  // namespace vidanno
