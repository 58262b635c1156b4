// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "nn.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace vidanno {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 20;
  std::uint64_t seed = 1;
  double grad_clip = 5.0;
  long long max_steps = 0;  // 0: no cap
  bool restore_best = true;
};

struct CurvePoint {
  long long step = 0;
  double loss = 0.0;
};

struct TrainResult {
  double initial_validation_loss = 0.0;
  double final_validation_loss = 0.0;
  double best_validation_loss = 0.0;
  long long best_step = 0;
  long long steps = 0;
  std::vector<CurvePoint> curve;       // per optimizer step, training batch loss
  std::vector<CurvePoint> validation;  // step 0 and after every epoch
};

/// Computes the loss of one batch of sample indices and accumulates parameter
/// gradients. All indices within a batch come from the same group.
using BatchLossFn = std::function<double(std::span<const std::size_t>)>;
/// Validation loss of the current parameters; NaN when there is no validation data.
using EvalFn = std::function<double()>;

/// Adam over shuffled same-group batches. Groups typically separate tracking
/// directions so each batch runs through a single predictor.
TrainResult run_training(const nn::ParameterRefs& params,
                         const std::vector<std::vector<std::size_t>>& groups,
                         const BatchLossFn& loss_fn, const EvalFn& eval_fn, const TrainConfig& cfg);

/// `step loss` per line.
void write_curve(std::span<const CurvePoint> curve, const std::filesystem::path& path);

}  // namespace vidanno
