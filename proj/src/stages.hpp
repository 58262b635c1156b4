// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0
//
// Pipeline stages. Each reads the artifacts of its upstream stages from the
// run's data/checkpoint/output directories, writes its own, and removes what
// it wrote if it fails.
//
//   data/<seq>/...              sequence directories (see dataset.hpp)
//   data/split.txt              role and name per line
//   data/<seq>/windows.win      window index
//   checkpoints/assess.ckpt     quality scorer, plus assess_curve.txt / assess_val.txt
//   checkpoints/refine.ckpt     geometry model, plus refine_curve.txt / refine_val.txt
//   checkpoints/mask.ckpt       learned mask predictor (mask_predictor = conv)
//   output/annotations/<seq>.ann, <seq>.failures.txt, <seq>.diag.csv
//   output/eval/<seq>.txt, output/report.txt, output/report.svg
//   output/ablation.txt and output/plots/*.svg

#pragma once

#include "box_inference.hpp"
#include "dataset.hpp"
#include "quality_metrics.hpp"
#include "run_config.hpp"
#include "training.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace vidanno {

enum class SplitRole { kTrain, kValidation, kTest };

const char* to_string(SplitRole r);
SplitRole parse_split_role(std::string_view s);

struct SplitEntry {
  SplitRole role = SplitRole::kTrain;
  std::string name;
  friend bool operator==(const SplitEntry&, const SplitEntry&) = default;
};

inline constexpr std::string_view kSplitMagic = "VIDANNO-SPLIT/1";

void write_split(std::span<const SplitEntry> entries, const std::filesystem::path& path);
std::vector<SplitEntry> read_split(const std::filesystem::path& path);
std::vector<std::string> split_names(std::span<const SplitEntry> entries, SplitRole role);

/// Deterministic shuffle of `names` by seed; the first train_fraction go to
/// training, of which validation_fraction are held out for validation.
std::vector<SplitEntry> make_split(std::vector<std::string> names, std::uint64_t seed, double train_fraction,
                                   double validation_fraction);

struct SynthSummary {
  std::vector<std::string> sequences;
  int drifted_snippets = 0;
  int snippet_runs = 0;
};

struct SplitSummary {
  std::vector<SplitEntry> entries;
  long long windows = 0;
};

struct TrainSummary {
  TrainResult result;
  long long samples = 0;
  long long validation_samples = 0;
  std::filesystem::path checkpoint;
};

struct AnnotateSummary {
  std::vector<std::string> sequences;
  long long frames = 0;
  long long failures = 0;
};

struct AblationRow {
  std::string name;
  EvalReport report;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::string text;
};

SynthSummary cmd_synth(const RunConfig& cfg);
SplitSummary cmd_split(const RunConfig& cfg);
TrainSummary cmd_train_assess(const RunConfig& cfg);
/// Trains the learned mask predictor first when mask_predictor = conv.
TrainSummary cmd_train_refine(const RunConfig& cfg);
AnnotateSummary cmd_annotate(const RunConfig& cfg);
EvalReport cmd_eval(const RunConfig& cfg);
AblationTable cmd_report(const RunConfig& cfg);

/// Formats the ablation rows as an aligned text table.
std::string format_ablation(std::span<const AblationRow> rows, std::span<const double> acc_thresholds);

/// Checkpoint helpers shared by the stages and tests.
void save_assess(AssessModel& model, const std::filesystem::path& path, const TrainResult* result = nullptr);
AssessModel load_assess(const std::filesystem::path& path);
void save_geometry(GeometryModel& model, const std::filesystem::path& path, const TrainResult* result = nullptr);
GeometryModel load_geometry(const std::filesystem::path& path);

}  // namespace vidanno
