// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite differences against the analytic backward passes, in double
// precision on tiny models (c=8, L=5, r=8, P=Q=16). Shared by the unit tests
// and the acceptance binary.

#ifndef VIDANNO_TESTS_GRADIENT_CHECK_HPP_
#define VIDANNO_TESTS_GRADIENT_CHECK_HPP_

#include "t_assess.hpp"
#include "test_fixtures.hpp"
#include "test_support.hpp"
#include "vg_refine.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace vidanno::testing {

inline constexpr double kFdEps = 1e-6;
inline constexpr double kFdTolerance = 1e-4;

struct GradCheck {
  std::string name;
  double rel_error = 0.0;
  double numeric_norm = 0.0;
};

inline ModelConfig tiny_config(nn::SequenceKind kind, int outputs) {
  ModelConfig c;
  c.map_size = 8;
  c.conv_channels = {3, 4};
  c.features = 8;
  c.hidden = 6;
  c.layers = 3;
  c.kind = kind;
  c.outputs = outputs;
  c.window_length = 5;
  c.seed = 21;
  return c;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

// Compares every entry of every parameter; one result per parameter group.
inline std::vector<GradCheck> check_parameters(const nn::ParameterRefs& params,
                                               const std::function<double()>& loss_and_grad,
                                               const std::function<double()>& loss_only) {
  nn::zero_grads(params);
  loss_and_grad();
  std::vector<GradCheck> out;
  for (nn::Parameter* p : params) {
    const Eigen::VectorXd analytic = Eigen::Map<const Eigen::VectorXd>(p->grad.data(), p->grad.size());
    Eigen::VectorXd numeric(p->value.size());
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      const double saved = p->value.data()[k];
      p->value.data()[k] = saved + kFdEps;
      const double up = loss_only();
      p->value.data()[k] = saved - kFdEps;
      const double down = loss_only();
      p->value.data()[k] = saved;
      numeric(k) = (up - down) / (2 * kFdEps);
    }
    out.push_back({p->name, relative_error(analytic, numeric), numeric.norm()});
  }
  return out;
}

/// L_conf through AssessModel for one direction. `model` is filled in so the
/// caller can inspect the other direction's gradients.
inline std::vector<GradCheck> assess_gradient_checks(nn::SequenceKind kind, Direction d, AssessModel& model) {
  std::mt19937_64 rng(kind == nn::SequenceKind::kLstm ? 1 : 2);
  model = AssessModel(tiny_config(kind, 1));
  const auto meta = toy_meta(300, 320, 240);
  std::vector<Window> windows;
  std::vector<std::vector<double>> targets;
  for (int valid : {5, 5, 3}) {
    windows.push_back(random_window(rng, 5, 8, d, valid));
    std::vector<double> t(5);
    for (auto& x : t) x = uniform(rng, -0.9, 0.9);
    targets.push_back(t);
  }
  const FrameBatch fb = make_frame_batch(windows, meta, 8);
  auto loss = [&](bool with_grad) {
    DirectionalModel::Cache cache;
    const nn::Matrix out = model.net().forward(fb, d, with_grad ? &cache : nullptr);
    nn::Matrix d_out = nn::Matrix::Zero(out.rows(), out.cols());
    double total = 0.0;
    for (int b = 0; b < fb.batch; ++b) {
      std::vector<double> pred(fb.steps);
      for (int t = 0; t < fb.steps; ++t) pred[t] = out(0, t * fb.batch + b);
      std::vector<double> g;
      total += loss_conf(pred, targets[b], windows[b].valid_mask, &g);
      for (int t = 0; t < fb.steps; ++t) d_out(0, t * fb.batch + b) = g[t];
    }
    if (with_grad) model.net().backward(d_out, d, cache);
    return total;
  };
  // Only the extractor and the predictor of `d` influence the loss.
  nn::ParameterRefs params = model.net().extractor_parameters();
  for (auto* p : model.net().predictor_parameters(d)) params.push_back(p);
  return check_parameters(params, [&] { return loss(true); }, [&] { return loss(false); });
}

// Entries small enough that some row and column sums stay below 1, so the
// rectified profile has both clipped and unclipped lines; lines within 1e-3
// of the kink are avoided by resampling.
inline Mask sparse_mask(std::mt19937_64& rng, int p, int q, double hi) {
  Mask m(p, q);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < q; ++j) m(i, j) = uniform(rng, 0, hi);
  }
  return m;
}

inline bool near_kink(const Mask& s) {
  for (int i = 0; i < s.rows(); ++i) {
    if (std::abs(s.row(i).sum() - 1.0) < 1e-3) return true;
  }
  for (int j = 0; j < s.cols(); ++j) {
    if (std::abs(s.col(j).sum() - 1.0) < 1e-3) return true;
  }
  return false;
}

inline SearchRegion unit_region(int p, int q) {
  SearchRegion r;
  r.width = q;
  r.height = p;
  r.center_x = q / 2.0;
  r.center_y = p / 2.0;
  r.rows = p;
  r.cols = q;
  return r;
}

/// d L_reg / d theta for each aggregation operator, 10 draws each.
inline std::vector<GradCheck> theta_gradient_checks() {
  std::mt19937_64 rng(6);
  const auto region = unit_region(16, 16);
  std::vector<GradCheck> out;
  for (Aggregation op : {Aggregation::kRectified, Aggregation::kSum, Aggregation::kAverage,
                         Aggregation::kRectifiedMax}) {
    for (int rep = 0; rep < 10; ++rep) {
      const Mask initial = sparse_mask(rng, 16, 16, op == Aggregation::kRectifiedMax ? 0.4 : 0.15);
      const Mask target = box_mask(region, BBox{uniform(rng, 0, 6), uniform(rng, 0, 6), uniform(rng, 9, 16),
                                                 uniform(rng, 9, 16)});
      const GaussianParams theta{uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 0.7), uniform(rng, 0.3, 1.0),
                                 uniform(rng, 0.3, 1.0), uniform(rng, 0.2, 2.0)};
      if (near_kink(apply_weight(initial, gaussian_weight_map(theta, 16, 16)))) continue;
      ThetaGrad g;
      weighted_profile_loss(initial, theta, target, op, &g);
      const Eigen::VectorXd analytic = Eigen::Map<const Eigen::VectorXd>(g.data(), 5);
      Eigen::VectorXd numeric(5);
      for (int k = 0; k < 5; ++k) {
        auto at = [&](double delta) {
          GaussianParams t = theta;
          double* fields[] = {&t.mu1, &t.mu2, &t.sigma1, &t.sigma2, &t.alpha};
          *fields[k] += delta;
          return weighted_profile_loss(initial, t, target, op, nullptr);
        };
        numeric(k) = (at(kFdEps) - at(-kFdEps)) / (2 * kFdEps);
      }
      out.push_back({std::string(to_string(op)) + " rep " + std::to_string(rep), relative_error(analytic, numeric),
                     numeric.norm()});
    }
  }
  return out;
}

/// Through the sigmoid/exp mapping from raw network outputs.
inline std::vector<GradCheck> raw_theta_gradient_checks() {
  std::mt19937_64 rng(8);
  const auto region = unit_region(16, 16);
  std::vector<GradCheck> out;
  for (int rep = 0; rep < 20; ++rep) {
    const Mask initial = sparse_mask(rng, 16, 16, 0.15);
    const Mask target = box_mask(region, BBox{3, 4, 12, 13});
    std::array<double, 5> raw;
    for (auto& r : raw) r = uniform(rng, -1, 1);
    if (near_kink(apply_weight(initial, gaussian_weight_map(theta_from_raw(raw), 16, 16)))) continue;
    ThetaGrad g;
    weighted_profile_loss(initial, theta_from_raw(raw), target, Aggregation::kRectified, &g);
    const auto dr = raw_gradient(raw, g);
    const Eigen::VectorXd analytic = Eigen::Map<const Eigen::VectorXd>(dr.data(), 5);
    Eigen::VectorXd numeric(5);
    for (int k = 0; k < 5; ++k) {
      auto r2 = raw;
      r2[k] += kFdEps;
      const double up = weighted_profile_loss(initial, theta_from_raw(r2), target, Aggregation::kRectified, nullptr);
      r2[k] -= 2 * kFdEps;
      const double down = weighted_profile_loss(initial, theta_from_raw(r2), target, Aggregation::kRectified, nullptr);
      numeric(k) = (up - down) / (2 * kFdEps);
    }
    out.push_back({"raw rep " + std::to_string(rep), relative_error(analytic, numeric), numeric.norm()});
  }
  return out;
}

/// The regression loss through the whole geometric module: fixed initial
/// masks and box masks per slot, gradients into every parameter.
inline std::vector<GradCheck> geometry_gradient_checks() {
  std::mt19937_64 rng(10);
  GeometryModel model(tiny_config(nn::SequenceKind::kLstm, 5));
  const auto meta = toy_meta(300, 320, 240);
  const auto region = unit_region(16, 16);
  std::vector<Window> windows;
  for (int valid : {5, 4}) windows.push_back(random_window(rng, 5, 8, Direction::kForward, valid));
  const FrameBatch fb = make_frame_batch(windows, meta, 8);
  std::vector<Mask> initial, target;
  for (int k = 0; k < fb.frames(); ++k) {
    initial.push_back(sparse_mask(rng, 16, 16, 0.15));
    const double x = uniform(rng, 1, 6), y = uniform(rng, 1, 6);
    target.push_back(box_mask(region, BBox{x, y, x + uniform(rng, 4, 9), y + uniform(rng, 4, 9)}));
  }
  auto loss = [&](bool with_grad) {
    DirectionalModel::Cache cache;
    const nn::Matrix out = model.net().forward(fb, Direction::kForward, with_grad ? &cache : nullptr);
    nn::Matrix d_out = nn::Matrix::Zero(out.rows(), out.cols());
    double total = 0;
    for (int col = 0; col < fb.frames(); ++col) {
      if (!fb.valid[col]) continue;
      const Eigen::VectorXd raw = out.col(col);
      const std::span<const double> r(raw.data(), 5);
      ThetaGrad g;
      total += weighted_profile_loss(initial[col], theta_from_raw(r), target[col], Aggregation::kRectified, &g);
      const auto dr = raw_gradient(r, g);
      for (int k = 0; k < 5; ++k) d_out(k, col) = dr[k];
    }
    if (with_grad) model.net().backward(d_out, Direction::kForward, cache);
    return total;
  };
  nn::ParameterRefs params = model.net().extractor_parameters();
  for (auto* p : model.net().predictor_parameters(Direction::kForward)) params.push_back(p);
  return check_parameters(params, [&] { return loss(true); }, [&] { return loss(false); });
}

}  // namespace vidanno::testing

#endif  // VIDANNO_TESTS_GRADIENT_CHECK_HPP_
