// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "training.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace vidanno {

TrainResult run_training(const nn::ParameterRefs& params,
                         const std::vector<std::vector<std::size_t>>& groups,
                         const BatchLossFn& loss_fn, const EvalFn& eval_fn, const TrainConfig& cfg) {
  std::size_t total = 0;
  for (const auto& g : groups) total += g.size();
  if (total == 0) throw_invalid("training set is empty");
  if (cfg.batch_size < 1) throw_invalid("batch size must be positive");
  if (cfg.epochs < 0) throw_invalid("epoch count must be non-negative");
  if (!(cfg.learning_rate >= 0.0)) throw_invalid("learning rate must be non-negative");

  nn::AdamOptions opts;
  opts.learning_rate = cfg.learning_rate;
  opts.grad_clip = cfg.grad_clip;
  nn::Adam adam(params, opts);
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x7261696eULL));

  TrainResult result;
  auto snapshot = [&] {
    std::vector<nn::Matrix> values;
    values.reserve(params.size());
    for (const auto* p : params) values.push_back(p->value);
    return values;
  };
  const double v0 = eval_fn();
  const bool has_val = std::isfinite(v0);
  result.initial_validation_loss = result.final_validation_loss = result.best_validation_loss = v0;
  result.validation.push_back({0, v0});
  auto best = snapshot();

  long long step = 0;
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    std::vector<std::vector<std::size_t>> batches;
    for (const auto& g : groups) {
      std::vector<std::size_t> order(g);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
        const auto end = std::min(order.size(), i + static_cast<std::size_t>(cfg.batch_size));
        batches.emplace_back(order.begin() + i, order.begin() + end);
      }
    }
    std::shuffle(batches.begin(), batches.end(), rng);
    double epoch_loss = 0.0;
    int epoch_batches = 0;
    for (const auto& b : batches) {
      nn::zero_grads(params);
      const double loss = loss_fn(b);
      epoch_loss += loss;
      ++epoch_batches;
      if (!std::isfinite(loss)) throw Error(ErrorCode::kInternal, "training loss became non-finite");
      adam.step();
      ++step;
      result.curve.push_back({step, loss});
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        stop = true;
        break;
      }
    }
    const double v = eval_fn();
    result.validation.push_back({step, v});
    info("epoch " + std::to_string(epoch + 1) + "/" + std::to_string(cfg.epochs) + " step " + std::to_string(step) +
         " train " + format_double(epoch_loss / std::max(1, epoch_batches)) + " val " +
         format_double(v));
    result.final_validation_loss = v;
    if (has_val && v < result.best_validation_loss) {
      result.best_validation_loss = v;
      result.best_step = step;
      best = snapshot();
    }
  }
  result.steps = step;
  if (has_val && cfg.restore_best && result.best_step != step) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  }
  return result;
}

void write_curve(std::span<const CurvePoint> curve, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : curve) out += std::to_string(p.step) + ' ' + format_double(p.loss) + '\n';
  write_text_file(path, out);
}

}  // namespace vidanno
