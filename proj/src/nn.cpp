// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "nn.hpp"

#include "common.hpp"

#include <cmath>

namespace vidanno::nn {

void zero_grads(const ParameterRefs& params) {
  for (auto* p : params) p->zero_grad();
}

void init_uniform(Matrix& m, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(const std::string& name, int in_ch, int out_ch, int kernel, int stride, int pad,
               Activation act)
    : weight(name + ".weight", out_ch, in_ch * kernel * kernel),
      bias(name + ".bias", out_ch, 1),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      act_(act) {}

void Conv2d::init(std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(in_ch_ * kernel_ * kernel_);
  init_uniform(weight.value, std::sqrt(6.0 / fan_in), rng);
  bias.value.setConstant(0.01);
}

Matrix Conv2d::forward(const Matrix& x, int n, int h, int w, Cache* cache) const {
  if (x.rows() != in_ch_ || x.cols() != static_cast<Eigen::Index>(n) * h * w) {
    throw_invalid("conv input shape mismatch");
  }
  const int ho = out_size(h);
  const int wo = out_size(w);
  const int kk = kernel_ * kernel_;
  Matrix cols(in_ch_ * kk, static_cast<Eigen::Index>(n) * ho * wo);
  for (int s = 0; s < n; ++s) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const Eigen::Index col = (static_cast<Eigen::Index>(s) * ho + oy) * wo + ox;
        double* dst = cols.col(col).data();
        for (int c = 0; c < in_ch_; ++c) {
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
              *dst++ = inside ? x(c, (static_cast<Eigen::Index>(s) * h + iy) * w + ix) : 0.0;
            }
          }
        }
      }
    }
  }
  Matrix out = weight.value * cols;
  out.colwise() += bias.value.col(0);
  if (act_ == Activation::kRelu) out = out.cwiseMax(0.0);
  if (cache) {
    cache->cols = std::move(cols);
    cache->out = out;
    cache->n = n;
    cache->h = h;
    cache->w = w;
  }
  return out;
}

Matrix Conv2d::backward(const Matrix& dy, const Cache& cache) {
  Matrix dz = dy;
  if (act_ == Activation::kRelu) dz = (cache.out.array() > 0.0).select(dy, 0.0);
  weight.grad.noalias() += dz * cache.cols.transpose();
  bias.grad.col(0) += dz.rowwise().sum();
  const Matrix dcols = weight.value.transpose() * dz;
  const int n = cache.n, h = cache.h, w = cache.w;
  const int ho = out_size(h);
  const int wo = out_size(w);
  Matrix dx = Matrix::Zero(in_ch_, static_cast<Eigen::Index>(n) * h * w);
  for (int s = 0; s < n; ++s) {
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        const Eigen::Index col = (static_cast<Eigen::Index>(s) * ho + oy) * wo + ox;
        const double* src = dcols.col(col).data();
        for (int c = 0; c < in_ch_; ++c) {
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = oy * stride_ - pad_ + ky;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = ox * stride_ - pad_ + kx;
              const double g = *src++;
              if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
                dx(c, (static_cast<Eigen::Index>(s) * h + iy) * w + ix) += g;
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

Matrix global_average(const Matrix& x, int n, int hw) {
  Matrix out(x.rows(), n);
  for (int s = 0; s < n; ++s) {
    out.col(s) = x.middleCols(static_cast<Eigen::Index>(s) * hw, hw).rowwise().mean();
  }
  return out;
}

Matrix global_average_backward(const Matrix& dy, int n, int hw) {
  Matrix dx(dy.rows(), static_cast<Eigen::Index>(n) * hw);
  for (int s = 0; s < n; ++s) {
    dx.middleCols(static_cast<Eigen::Index>(s) * hw, hw) = (dy.col(s) / hw).replicate(1, hw);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(const std::string& name, int in, int out)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {}

void Linear::init(std::mt19937_64& rng) {
  const double fan = static_cast<double>(weight.value.cols() + weight.value.rows());
  init_uniform(weight.value, std::sqrt(6.0 / fan), rng);
  bias.value.setZero();
}

Matrix Linear::forward(const Matrix& x) const {
  Matrix y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Linear::backward(const Matrix& dy, const Matrix& x) {
  weight.grad.noalias() += dy * x.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  return weight.value.transpose() * dy;
}

// ---------------------------------------------------------------------------
// SequenceLayer

const char* to_string(SequenceKind k) { return k == SequenceKind::kLstm ? "lstm" : "dense"; }

SequenceKind parse_sequence_kind(const std::string& s) {
  if (s == "lstm") return SequenceKind::kLstm;
  if (s == "dense" || s == "fc") return SequenceKind::kDense;
  throw_invalid("unknown sequence layer kind '" + s + "' (expected lstm or dense)");
}

SequenceLayer::SequenceLayer(const std::string& name, SequenceKind kind, int in, int hidden)
    : kind_(kind), in_(in), hidden_(hidden) {
  const int gates = kind == SequenceKind::kLstm ? 4 * hidden : hidden;
  wx = Parameter(name + ".wx", gates, in);
  wh = Parameter(name + ".wh", kind == SequenceKind::kLstm ? gates : 0, kind == SequenceKind::kLstm ? hidden : 0);
  bias = Parameter(name + ".bias", gates, 1);
}

ParameterRefs SequenceLayer::parameters() {
  if (kind_ == SequenceKind::kLstm) return {&wx, &wh, &bias};
  return {&wx, &bias};
}

void SequenceLayer::init(std::mt19937_64& rng) {
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden_));
  init_uniform(wx.value, limit, rng);
  if (kind_ == SequenceKind::kLstm) {
    init_uniform(wh.value, limit, rng);
    bias.value.setZero();
    bias.value.block(hidden_, 0, hidden_, 1).setOnes();  // forget gate
  } else {
    init_uniform(bias.value, limit, rng);
  }
}

Matrix SequenceLayer::forward(const Matrix& x, int steps, int batch, Cache* cache) const {
  const Eigen::Index H = hidden_;
  if (x.rows() != in_ || x.cols() != static_cast<Eigen::Index>(steps) * batch) {
    throw_invalid("sequence layer input shape mismatch");
  }
  Matrix pre = wx.value * x;
  pre.colwise() += bias.value.col(0);
  if (kind_ == SequenceKind::kDense) {
    Matrix h = pre.array().tanh().matrix();
    if (cache) {
      cache->x = x;
      cache->gates = h;
      cache->steps = steps;
      cache->batch = batch;
    }
    return h;
  }
  Matrix gates(4 * H, pre.cols());
  Matrix c(H, pre.cols());
  Matrix tanh_c(H, pre.cols());
  Matrix h(H, pre.cols());
  Matrix h_prev = Matrix::Zero(H, batch);
  Matrix c_prev = Matrix::Zero(H, batch);
  for (int t = 0; t < steps; ++t) {
    const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
    Matrix g = pre.middleCols(col, batch);
    g.noalias() += wh.value * h_prev;
    auto gi = gates.block(0, col, H, batch);
    auto gf = gates.block(H, col, H, batch);
    auto gg = gates.block(2 * H, col, H, batch);
    auto go = gates.block(3 * H, col, H, batch);
    gi = sigmoid(g.topRows(H));
    gf = sigmoid(g.middleRows(H, H));
    gg = g.middleRows(2 * H, H).array().tanh().matrix();
    go = sigmoid(g.bottomRows(H));
    auto ct = c.middleCols(col, batch);
    ct = (gf.array() * c_prev.array() + gi.array() * gg.array()).matrix();
    auto tct = tanh_c.middleCols(col, batch);
    tct = ct.array().tanh().matrix();
    auto ht = h.middleCols(col, batch);
    ht = (go.array() * tct.array()).matrix();
    h_prev = ht;
    c_prev = ct;
  }
  if (cache) {
    cache->x = x;
    cache->gates = std::move(gates);
    cache->c = std::move(c);
    cache->tanh_c = std::move(tanh_c);
    cache->h = h;
    cache->steps = steps;
    cache->batch = batch;
  }
  return h;
}

Matrix SequenceLayer::backward(const Matrix& dh_out, const Cache& cache) {
  const Eigen::Index H = hidden_;
  const int steps = cache.steps;
  const int batch = cache.batch;
  if (kind_ == SequenceKind::kDense) {
    const Matrix dpre = (dh_out.array() * (1.0 - cache.gates.array().square())).matrix();
    wx.grad.noalias() += dpre * cache.x.transpose();
    bias.grad.col(0) += dpre.rowwise().sum();
    return wx.value.transpose() * dpre;
  }
  Matrix dpre(4 * H, dh_out.cols());
  Matrix dh_next = Matrix::Zero(H, batch);
  Matrix dc_next = Matrix::Zero(H, batch);
  for (int t = steps - 1; t >= 0; --t) {
    const Eigen::Index col = static_cast<Eigen::Index>(t) * batch;
    const auto gi = cache.gates.block(0, col, H, batch).array();
    const auto gf = cache.gates.block(H, col, H, batch).array();
    const auto gg = cache.gates.block(2 * H, col, H, batch).array();
    const auto go = cache.gates.block(3 * H, col, H, batch).array();
    const auto tct = cache.tanh_c.middleCols(col, batch).array();
    const Matrix dh = dh_out.middleCols(col, batch) + dh_next;
    const Matrix dc = (dh.array() * go * (1.0 - tct.square()) + dc_next.array()).matrix();
    Matrix c_prev = t > 0 ? Matrix(cache.c.middleCols(col - batch, batch)) : Matrix::Zero(H, batch);
    dpre.block(0, col, H, batch) = (dc.array() * gg * gi * (1.0 - gi)).matrix();
    dpre.block(H, col, H, batch) = (dc.array() * c_prev.array() * gf * (1.0 - gf)).matrix();
    dpre.block(2 * H, col, H, batch) = (dc.array() * gi * (1.0 - gg.square())).matrix();
    dpre.block(3 * H, col, H, batch) = (dh.array() * tct * go * (1.0 - go)).matrix();
    dc_next = (dc.array() * gf).matrix();
    const auto dg = dpre.middleCols(col, batch);
    if (t > 0) {
      wh.grad.noalias() += dg * cache.h.middleCols(col - batch, batch).transpose();
    }
    dh_next.noalias() = wh.value.transpose() * dg;
  }
  wx.grad.noalias() += dpre * cache.x.transpose();
  bias.grad.col(0) += dpre.rowwise().sum();
  return wx.value.transpose() * dpre;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(ParameterRefs params, AdamOptions options) : params_(std::move(params)), options_(options) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  double scale = 1.0;
  if (options_.grad_clip > 0.0) {
    double sq = 0.0;
    for (auto* p : params_) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > options_.grad_clip) scale = options_.grad_clip / norm;
  }
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double corr1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double corr2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto* p = params_[i];
    const Matrix g = p->grad * scale;
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    if (lr == 0.0) continue;
    p->value.array() -= lr * (m_[i].array() / corr1) / ((v_[i].array() / corr2).sqrt() + options_.epsilon);
  }
}

}  // namespace vidanno::nn
