// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal layers with explicit forward/backward passes. Activations are
// column-per-sample matrices; layers hold parameters and gradients, while
// per-call intermediates live in caller-owned caches so a trained model can be
// evaluated concurrently.

#pragma once

#include <Eigen/Core>

#include <random>
#include <string>
#include <vector>

namespace vidanno::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, int rows, int cols)
      : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

using ParameterRefs = std::vector<Parameter*>;

void zero_grads(const ParameterRefs& params);
void init_uniform(Matrix& m, double limit, std::mt19937_64& rng);

inline Matrix sigmoid(const Matrix& x) {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

enum class Activation { kNone, kRelu };

/// Square-kernel 2-D convolution with zero padding. Input is (in_ch, n*h*w),
/// sample-major then row-major spatial; output is (out_ch, n*ho*wo).
class Conv2d {
 public:
  struct Cache {
    Matrix cols;
    Matrix out;
    int n = 0, h = 0, w = 0;
  };

  Conv2d() = default;
  Conv2d(const std::string& name, int in_ch, int out_ch, int kernel, int stride, int pad,
         Activation act);

  int out_size(int s) const { return (s + 2 * pad_ - kernel_) / stride_ + 1; }
  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }

  Matrix forward(const Matrix& x, int n, int h, int w, Cache* cache) const;
  Matrix backward(const Matrix& dy, const Cache& cache);

  void init(std::mt19937_64& rng);
  ParameterRefs parameters() { return {&weight, &bias}; }

  Parameter weight;
  Parameter bias;

 private:
  int in_ch_ = 0, out_ch_ = 0, kernel_ = 3, stride_ = 1, pad_ = 0;
  Activation act_ = Activation::kNone;
};

/// Per-sample spatial mean: (C, n*hw) -> (C, n).
Matrix global_average(const Matrix& x, int n, int hw);
Matrix global_average_backward(const Matrix& dy, int n, int hw);

/// y = W x + b.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out);

  Matrix forward(const Matrix& x) const;
  Matrix backward(const Matrix& dy, const Matrix& x);

  void init(std::mt19937_64& rng);
  ParameterRefs parameters() { return {&weight, &bias}; }

  Parameter weight;
  Parameter bias;
};

enum class SequenceKind { kLstm, kDense };

const char* to_string(SequenceKind k);
SequenceKind parse_sequence_kind(const std::string& s);

/// One layer of the sequential predictor over T steps of B sequences; column
/// t*B + b holds step t of sequence b. kLstm is a unidirectional LSTM
/// (gate order i, f, g, o); kDense is a per-step tanh layer of equal width
/// with no recurrence.
class SequenceLayer {
 public:
  struct Cache {
    Matrix x;
    Matrix gates;  // post-activation i, f, g, o (LSTM) or tanh output (dense)
    Matrix c;
    Matrix tanh_c;
    Matrix h;
    int steps = 0, batch = 0;
  };

  SequenceLayer() = default;
  SequenceLayer(const std::string& name, SequenceKind kind, int in, int hidden);

  Matrix forward(const Matrix& x, int steps, int batch, Cache* cache) const;
  Matrix backward(const Matrix& dh, const Cache& cache);

  void init(std::mt19937_64& rng);
  ParameterRefs parameters();
  SequenceKind kind() const { return kind_; }
  int hidden() const { return hidden_; }

  Parameter wx;
  Parameter wh;
  Parameter bias;

 private:
  SequenceKind kind_ = SequenceKind::kLstm;
  int in_ = 0, hidden_ = 0;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
};

class Adam {
 public:
  Adam(ParameterRefs params, AdamOptions options);
  void step();
  long long steps() const { return t_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

 private:
  ParameterRefs params_;
  AdamOptions options_;
  std::vector<Matrix> m_, v_;
  long long t_ = 0;
};

}  // namespace vidanno::nn
