// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "stages.hpp"

#include "common.hpp"
#include "mask_predictor.hpp"
#include "plot.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

namespace vidanno {

namespace fs = std::filesystem;

namespace {

// Everything a stage writes is registered here first; if the stage does not
// reach commit(), the registered paths are removed again.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) {
      std::error_code ec;
      fs::remove_all(*it, ec);
    }
  }

  fs::path file(fs::path p) {
    std::lock_guard lock(mu_);
    paths_.push_back(p);
    return p;
  }

  /// Creates `dir`; only directories that did not exist before are registered.
  fs::path dir(fs::path p) {
    std::lock_guard lock(mu_);
    fs::path top;
    for (fs::path q = p; !q.empty() && !fs::exists(q); q = q.parent_path()) {
      top = q;
      if (q == q.parent_path()) break;
    }
    fs::create_directories(p);
    if (!top.empty()) paths_.push_back(top);
    return p;
  }

  void commit() { committed_ = true; }

 private:
  std::mutex mu_;
  std::vector<fs::path> paths_;
  bool committed_ = false;
};

// Runs fn(0..n-1) on a small worker pool. Results must go to per-index slots;
// the first failure by index is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

fs::path split_path(const RunConfig& cfg) { return cfg.data_path() / "split.txt"; }
fs::path annotations_dir(const RunConfig& cfg) { return cfg.output_path() / "annotations"; }

fs::path require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw_not_found(what + " not found: " + p.string());
  return p;
}

std::vector<SplitEntry> load_split(const RunConfig& cfg) {
  return read_split(require_file(split_path(cfg), "split file (run split first)"));
}

// Checks that the split stage indexed the sequence with the current window settings.
void check_window_index(const RunConfig& cfg, const std::string& name) {
  const fs::path p = require_file(cfg.data_path() / name / "windows.win", "window index (run split first)");
  const WindowIndex idx = read_window_index(p);
  if (idx.length != cfg.window_length || idx.stride != cfg.window_stride) {
    throw Error(ErrorCode::kState, p.string() + " was built with window length " + std::to_string(idx.length) +
                                       " and stride " + std::to_string(idx.stride) + "; rerun split");
  }
}

// Stable addresses: samples keep pointers into the contexts.
struct LoadedSet {
  std::deque<LoadedSequence> sequences;
  std::deque<VideoContext> contexts;
};

void load_into(LoadedSet& set, const RunConfig& cfg, const std::vector<std::string>& names, bool require_gt) {
  for (const auto& name : names) {
    check_window_index(cfg, name);
    set.sequences.push_back(read_sequence(cfg.data_path() / name, cfg.dump_options(), require_gt));
    set.contexts.push_back(set.sequences.back().context());
  }
}

std::vector<std::string> annotate_names(const RunConfig& cfg) {
  std::vector<std::string> names = cfg.annotate_sequences;
  if (names.empty()) names = split_names(load_split(cfg), SplitRole::kTest);
  if (names.empty()) throw_invalid("no sequences to annotate: the test split is empty");
  return names;
}

ModelConfig checked_config(const CheckpointInfo& info, const fs::path& path, const std::string& kind, int outputs) {
  if (info.kind != kind) throw_format(path.string() + ": expected a '" + kind + "' checkpoint, found '" + info.kind + "'");
  if (info.config.outputs != outputs) throw_format(path.string() + ": wrong output count");
  return info.config;
}

std::string train_metadata(const TrainResult* r) {
  nlohmann::json j = nlohmann::json::object();
  if (r) {
    j["steps"] = r->steps;
    j["best_step"] = r->best_step;
    if (std::isfinite(r->best_validation_loss)) j["best_validation_loss"] = r->best_validation_loss;
  }
  return j.dump();
}

void require_window_length(const ModelConfig& m, const RunConfig& cfg, const fs::path& path) {
  if (m.window_length != cfg.window_length) {
    throw Error(ErrorCode::kState, path.string() + " was trained with window length " +
                                       std::to_string(m.window_length) + ", config has " +
                                       std::to_string(cfg.window_length));
  }
}

void write_training_outputs(OutputGuard& guard, const fs::path& dir, const std::string& stem, const TrainResult& r) {
  write_curve(r.curve, guard.file(dir / (stem + "_curve.txt")));
  write_curve(r.validation, guard.file(dir / (stem + "_val.txt")));
}

std::unique_ptr<MaskPredictor> make_mask_predictor(const RunConfig& cfg) {
  if (cfg.mask_predictor == "oracle") return std::make_unique<OracleMaskPredictor>();
  const fs::path p = require_file(cfg.checkpoint_path() / "mask.ckpt", "mask predictor checkpoint");
  return std::make_unique<ConvMaskPredictor>(ConvMaskPredictor::load(p));
}

void require_mask_inputs(const RunConfig& cfg, const LoadedSequence& s) {
  if (cfg.mask_predictor == "oracle" && !s.scene) {
    throw_invalid(s.name + ": the oracle mask predictor needs a synthetic scene (scene.txt)");
  }
  if (cfg.mask_predictor == "conv" && !s.frames) {
    throw_invalid(s.name + ": the conv mask predictor needs frames (frames/ or scene.txt)");
  }
}

struct Labels {
  VideoMeta meta;
  std::map<int, BBox> manual;
  std::vector<BBox> ground_truth;
};

Labels read_labels(const fs::path& dir) {
  Labels l;
  l.meta = read_video_meta(require_file(dir / "video.txt", "video description"));
  for (const auto& r : read_annotations(require_file(dir / "anchors.ann", "anchor file")).records) {
    if (r.box) l.manual[r.frame_idx] = *r.box;
  }
  l.ground_truth = read_ground_truth(require_file(dir / "gt.ann", "ground truth"), l.meta);
  return l;
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<double> read_curve_values(const fs::path& p, std::vector<double>* steps) {
  std::vector<double> out;
  const std::string text = read_text_file(p);
  for (auto line : split(text, '\n')) {
    const auto f = split(trim(line), ' ');
    if (f.size() != 2) continue;
    steps->push_back(parse_double(f[0]));
    out.push_back(parse_double(f[1]));
  }
  return out;
}

}  // namespace

const char* to_string(SplitRole r) {
  switch (r) {
    case SplitRole::kTrain: return "train";
    case SplitRole::kValidation: return "val";
    case SplitRole::kTest: return "test";
  }
  return "?";
}

SplitRole parse_split_role(std::string_view s) {
  if (s == "train") return SplitRole::kTrain;
  if (s == "val") return SplitRole::kValidation;
  if (s == "test") return SplitRole::kTest;
  throw_format("unknown split role '" + std::string(s) + "'");
}

void write_split(std::span<const SplitEntry> entries, const fs::path& path) {
  std::string out(kSplitMagic);
  out += '\n';
  for (const auto& e : entries) out += std::string(to_string(e.role)) + ' ' + e.name + '\n';
  write_text_file(path, out);
}

std::vector<SplitEntry> read_split(const fs::path& path) {
  std::vector<SplitEntry> out;
  bool header = false;
  int line_no = 0;
  const std::string text = read_text_file(path);
  for (auto line : split(text, '\n')) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (!header) {
        if (line != kSplitMagic) throw_format("bad split header");
        header = true;
        continue;
      }
      const auto sp = line.find(' ');
      if (sp == std::string_view::npos) throw_format("expected 'role name'");
      out.push_back({parse_split_role(line.substr(0, sp)), std::string(trim(line.substr(sp + 1)))});
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw_format(path.string() + ": missing split header");
  return out;
}

std::vector<std::string> split_names(std::span<const SplitEntry> entries, SplitRole role) {
  std::vector<std::string> out;
  for (const auto& e : entries) {
    if (e.role == role) out.push_back(e.name);
  }
  return out;
}

std::vector<SplitEntry> make_split(std::vector<std::string> names, std::uint64_t seed, double train_fraction,
                                   double validation_fraction) {
  if (names.empty()) throw_invalid("no sequences to split");
  std::sort(names.begin(), names.end());
  std::mt19937_64 rng(mix_seed(seed, 0x73706c6974ULL));
  std::shuffle(names.begin(), names.end(), rng);
  const int n = static_cast<int>(names.size());
  const int train_part = std::clamp(static_cast<int>(std::lround(n * train_fraction)), 1, n);
  const int val = std::min(train_part - 1, static_cast<int>(std::lround(train_part * validation_fraction)));
  std::vector<SplitEntry> out;
  for (int i = 0; i < n; ++i) {
    const SplitRole r = i < train_part - val ? SplitRole::kTrain : i < train_part ? SplitRole::kValidation
                                                                                  : SplitRole::kTest;
    out.push_back({r, names[i]});
  }
  std::stable_sort(out.begin(), out.end(), [](const SplitEntry& a, const SplitEntry& b) {
    return a.role != b.role ? a.role < b.role : a.name < b.name;
  });
  return out;
}

void save_assess(AssessModel& model, const fs::path& path, const TrainResult* result) {
  save_checkpoint(path, CheckpointInfo{"assess", model.config(), train_metadata(result)}, model.net().parameters());
}

AssessModel load_assess(const fs::path& path) {
  require_file(path, "assessment checkpoint");
  AssessModel model(checked_config(read_checkpoint_info(path), path, "assess", 1));
  load_checkpoint_values(path, model.net().parameters());
  return model;
}

void save_geometry(GeometryModel& model, const fs::path& path, const TrainResult* result) {
  save_checkpoint(path, CheckpointInfo{"geometry", model.config(), train_metadata(result)},
                  model.net().parameters());
}

GeometryModel load_geometry(const fs::path& path) {
  require_file(path, "geometry checkpoint");
  GeometryModel model(checked_config(read_checkpoint_info(path), path, "geometry", 5));
  load_checkpoint_values(path, model.net().parameters());
  return model;
}

SynthSummary cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  OutputGuard guard;
  const fs::path data = guard.dir(cfg.data_path());
  SynthSummary summary;
  for (int i = 0; i < cfg.synth_count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%03d", i);
    summary.sequences.emplace_back(name);
  }
  std::vector<int> drifted(summary.sequences.size()), runs(summary.sequences.size());
  parallel_for(summary.sequences.size(), cfg.threads, [&](std::size_t i) {
    SynthConfig s = cfg.synth;
    s.seed = mix_seed(cfg.seed, 0x53000 + i);
    s.anchor_interval = cfg.anchor_interval;
    s.map_size = cfg.map_size;
    const SyntheticSequence seq = generate_sequence(s, summary.sequences[i]);
    const fs::path dir = data / summary.sequences[i];
    fs::remove_all(dir);
    write_sequence(seq, guard.file(dir));
    drifted[i] = seq.drifted_snippets;
    runs[i] = seq.snippet_runs;
  });
  for (std::size_t i = 0; i < drifted.size(); ++i) {
    summary.drifted_snippets += drifted[i];
    summary.snippet_runs += runs[i];
  }
  guard.commit();
  info("synth: " + std::to_string(summary.sequences.size()) + " sequences in " + data.string() + ", " +
       std::to_string(summary.drifted_snippets) + "/" + std::to_string(summary.snippet_runs) +
       " drifted snippet runs");
  return summary;
}

SplitSummary cmd_split(const RunConfig& cfg) {
  cfg.validate();
  const fs::path data = cfg.data_path();
  SplitSummary summary;
  summary.entries = make_split(list_sequences(data), cfg.seed, cfg.train_fraction, cfg.validation_fraction);
  OutputGuard guard;
  std::vector<long long> counts(summary.entries.size());
  parallel_for(summary.entries.size(), cfg.threads, [&](std::size_t i) {
    const auto& name = summary.entries[i].name;
    const LoadedSequence s = read_sequence(data / name, cfg.dump_options(), false);
    WindowIndex idx;
    idx.video_id = s.data.meta.video_id;
    idx.length = cfg.window_length;
    idx.stride = cfg.window_stride;
    int id = 0;
    for (const auto& sw : window_snippets(snippets_of(s.data), cfg.window_length, cfg.window_stride)) {
      for (const auto& w : sw.windows) idx.entries.push_back({id++, sw.span, w.offset, sw.direction, w.valid_count()});
    }
    write_window_index(idx, guard.file(data / name / "windows.win"));
    counts[i] = id;
  });
  for (auto c : counts) summary.windows += c;
  write_split(summary.entries, guard.file(split_path(cfg)));
  guard.commit();
  info("split: " + std::to_string(split_names(summary.entries, SplitRole::kTrain).size()) + " train, " +
       std::to_string(split_names(summary.entries, SplitRole::kValidation).size()) + " val, " +
       std::to_string(split_names(summary.entries, SplitRole::kTest).size()) + " test; " +
       std::to_string(summary.windows) + " windows");
  return summary;
}

TrainSummary cmd_train_assess(const RunConfig& cfg) {
  cfg.validate();
  const auto split = load_split(cfg);
  LoadedSet train_set, val_set;
  load_into(train_set, cfg, split_names(split, SplitRole::kTrain), true);
  load_into(val_set, cfg, split_names(split, SplitRole::kValidation), true);
  std::vector<AssessSample> train, val;
  for (const auto& s : train_set.sequences) {
    auto v = make_assess_samples(s.data, cfg.window_length, cfg.window_stride, cfg.quality);
    std::move(v.begin(), v.end(), std::back_inserter(train));
  }
  for (const auto& s : val_set.sequences) {
    auto v = make_assess_samples(s.data, cfg.window_length, cfg.window_stride, cfg.quality);
    std::move(v.begin(), v.end(), std::back_inserter(val));
  }
  info("train-assess: " + std::to_string(train.size()) + " training windows, " + std::to_string(val.size()) +
       " validation windows, " + nn::to_string(cfg.assess.kind) + " predictor");
  AssessModel model(cfg.assess_model());
  TrainConfig tc = cfg.train;
  tc.seed = mix_seed(cfg.seed, 21);
  TrainSummary summary;
  summary.result = train_assess(model, train, val, tc);
  summary.samples = static_cast<long long>(train.size());
  summary.validation_samples = static_cast<long long>(val.size());
  OutputGuard guard;
  const fs::path dir = guard.dir(cfg.checkpoint_path());
  summary.checkpoint = dir / "assess.ckpt";
  save_assess(model, guard.file(summary.checkpoint), &summary.result);
  write_training_outputs(guard, dir, "assess", summary.result);
  guard.commit();
  return summary;
}

TrainSummary cmd_train_refine(const RunConfig& cfg) {
  cfg.validate();
  const auto split = load_split(cfg);
  LoadedSet train_set, val_set;
  load_into(train_set, cfg, split_names(split, SplitRole::kTrain), true);
  load_into(val_set, cfg, split_names(split, SplitRole::kValidation), true);
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& s : set->sequences) require_mask_inputs(cfg, s);
  }
  std::vector<RefineSample> train, val;
  for (std::size_t i = 0; i < train_set.sequences.size(); ++i) {
    auto v = make_refine_samples(train_set.sequences[i].data, &train_set.contexts[i], cfg.window_length,
                                 cfg.window_stride);
    std::move(v.begin(), v.end(), std::back_inserter(train));
  }
  for (std::size_t i = 0; i < val_set.sequences.size(); ++i) {
    auto v = make_refine_samples(val_set.sequences[i].data, &val_set.contexts[i], cfg.window_length,
                                 cfg.window_stride);
    std::move(v.begin(), v.end(), std::back_inserter(val));
  }

  OutputGuard guard;
  const fs::path dir = guard.dir(cfg.checkpoint_path());
  std::unique_ptr<MaskPredictor> masks;
  if (cfg.mask_predictor == "conv") {
    auto conv = std::make_unique<ConvMaskPredictor>(cfg.mask_channels, mix_seed(cfg.seed, 31));
    const auto items = mask_items_from(train, cfg.mask_item_stride);
    const auto val_items = mask_items_from(val, cfg.mask_item_stride);
    info("train-refine: mask predictor on " + std::to_string(items.size()) + " frames");
    TrainConfig mt = cfg.mask_train;
    mt.seed = mix_seed(cfg.seed, 32);
    const TrainResult r = train_mask_predictor(*conv, items, val_items, mt, cfg.aggregation, cfg.mask_rows,
                                               cfg.mask_cols);
    conv->save(guard.file(dir / "mask.ckpt"));
    write_training_outputs(guard, dir, "mask", r);
    masks = std::move(conv);
  } else {
    masks = std::make_unique<OracleMaskPredictor>();
  }

  info("train-refine: " + std::to_string(train.size()) + " training windows, " + std::to_string(val.size()) +
       " validation windows, " + masks->name() + " masks, " + to_string(cfg.aggregation) + " aggregation");
  GeometryModel model(cfg.refine_model());
  TrainSummary summary;
  summary.result = train_refine(model, train, val, *masks, cfg.refine_train_config());
  summary.samples = static_cast<long long>(train.size());
  summary.validation_samples = static_cast<long long>(val.size());
  summary.checkpoint = dir / "refine.ckpt";
  save_geometry(model, guard.file(summary.checkpoint), &summary.result);
  write_training_outputs(guard, dir, "refine", summary.result);
  guard.commit();
  return summary;
}

AnnotateSummary cmd_annotate(const RunConfig& cfg) {
  cfg.validate();
  const AnnotateConfig acfg = cfg.annotate_config();
  const fs::path assess_path = cfg.checkpoint_path() / "assess.ckpt";
  const AssessModel assess = load_assess(assess_path);
  require_window_length(assess.config(), cfg, assess_path);
  std::unique_ptr<GeometryModel> geometry;
  if (acfg.refine == RefineMode::kVisualGeometric) {
    const fs::path p = cfg.checkpoint_path() / "refine.ckpt";
    geometry = std::make_unique<GeometryModel>(load_geometry(p));
    require_window_length(geometry->config(), cfg, p);
  }
  std::unique_ptr<MaskPredictor> masks;
  if (acfg.refine != RefineMode::kNone) masks = make_mask_predictor(cfg);

  AnnotateSummary summary;
  summary.sequences = annotate_names(cfg);
  OutputGuard guard;
  const fs::path out = guard.dir(annotations_dir(cfg));
  std::vector<long long> frames(summary.sequences.size()), failures(summary.sequences.size());
  parallel_for(summary.sequences.size(), cfg.threads, [&](std::size_t i) {
    const auto& name = summary.sequences[i];
    const LoadedSequence s = read_sequence(cfg.data_path() / name, cfg.dump_options(), false);
    if (masks) require_mask_inputs(cfg, s);
    const VideoContext ctx = s.context();
    const AnnotationResult r = annotate_video(s.data, assess, geometry.get(), masks.get(), &ctx, acfg);
    write_annotations(r.records, s.data.meta, guard.file(out / (name + ".ann")));
    write_frame_list(r.failures, guard.file(out / (name + ".failures.txt")));
    write_diagnostics(r.frames, guard.file(out / (name + ".diag.csv")));
    frames[i] = s.data.meta.frame_count;
    failures[i] = static_cast<long long>(r.failures.size());
    info("annotate: " + name + ": " + std::to_string(r.failures.size()) + " failure frames");
  });
  for (std::size_t i = 0; i < frames.size(); ++i) {
    summary.frames += frames[i];
    summary.failures += failures[i];
  }
  guard.commit();
  return summary;
}

EvalReport cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  OutputGuard guard;
  const fs::path out = cfg.output_path();
  if (!cfg.eval_annotations.empty()) {
    const fs::path ann = require_file(resolve_output_path(cfg.eval_annotations), "annotation file");
    const AnnotationFile file = read_annotations(ann);
    validate_finished(file.records, file.meta);
    const auto gt = read_ground_truth(require_file(resolve_output_path(cfg.eval_ground_truth), "ground truth"),
                                      file.meta);
    const EvalReport r = evaluate(file.records, gt, cfg.acc_thresholds);
    guard.dir(out);
    write_report(r, guard.file(out / ("report_" + ann.stem().string() + ".txt")));
    guard.commit();
    return r;
  }
  const auto names = annotate_names(cfg);
  std::vector<EvalReport> reports;
  const fs::path eval_dir = guard.dir(out / "eval");
  for (const auto& name : names) {
    const AnnotationFile file =
        read_annotations(require_file(annotations_dir(cfg) / (name + ".ann"), "annotations (run annotate first)"));
    validate_finished(file.records, file.meta);
    const auto gt = read_ground_truth(require_file(cfg.data_path() / name / "gt.ann", "ground truth"), file.meta);
    reports.push_back(evaluate(file.records, gt, cfg.acc_thresholds));
    write_report(reports.back(), guard.file(eval_dir / (name + ".txt")));
  }
  const EvalReport total = combine_reports(reports);
  write_report(total, guard.file(out / "report.txt"));
  std::vector<std::string> names_plot{"mIoU"};
  std::vector<double> values{total.miou};
  for (const auto& [t, v] : total.acc_at) {
    names_plot.push_back("Acc@" + fixed(t, 2));
    values.push_back(v);
  }
  names_plot.insert(names_plot.end(), {"err rate", "labor red."});
  values.insert(values.end(), {total.err_rate, total.labor_reduction});
  write_svg(bar_chart_svg(names_plot, values, {"Evaluation over " + std::to_string(names.size()) + " sequences", "", ""}),
            guard.file(out / "report.svg"));
  guard.commit();
  return total;
}

std::string format_ablation(std::span<const AblationRow> rows, std::span<const double> acc_thresholds) {
  std::string out = "variant      miou    ";
  for (double t : acc_thresholds) out += "acc@" + fixed(t, 1) + " ";
  out += "err_rate failures labor_red\n";
  for (const auto& row : rows) {
    std::string name = row.name;
    name.resize(std::max<std::size_t>(name.size(), 12), ' ');
    out += name + " " + fixed(row.report.miou);
    for (double t : acc_thresholds) {
      const auto it = row.report.acc_at.find(t);
      out += "  " + fixed(it == row.report.acc_at.end() ? 0.0 : it->second);
    }
    char tail[96];
    std::snprintf(tail, sizeof tail, "   %.4f %8d    %.4f\n", row.report.err_rate, row.report.failures,
                  row.report.labor_reduction);
    out += tail;
  }
  return out;
}

AblationTable cmd_report(const RunConfig& cfg) {
  cfg.validate();
  const auto names = annotate_names(cfg);
  const fs::path out = cfg.output_path();
  struct Row {
    std::string name;
    Variant variant;
  };
  const std::vector<Row> layout{{"Fwd", Variant::kForward},           {"Bwd", Variant::kBackward},
                                {"Sel", Variant::kSelect},            {"Sel-fail", Variant::kSelectFail},
                                {"w/o-Refine", Variant::kSelectFail}, {"V-Refine", Variant::kVisualRefine},
                                {"VG-Refine", Variant::kGeometricRefine}};
  std::vector<std::vector<EvalReport>> per_row(layout.size());
  std::vector<double> iou_fwd, iou_final;
  struct Trace {
    std::vector<double> frame, score[2], target[2];
  } trace;
  for (std::size_t n = 0; n < names.size(); ++n) {
    const auto& name = names[n];
    const Labels labels = read_labels(cfg.data_path() / name);
    AnnotationResult result;
    result.frames =
        read_diagnostics(require_file(annotations_dir(cfg) / (name + ".diag.csv"), "diagnostics (run annotate first)"));
    for (std::size_t k = 0; k < layout.size(); ++k) {
      const auto recs = variant_records(result, labels.manual, layout[k].variant, cfg.inference);
      per_row[k].push_back(evaluate(recs, labels.ground_truth, cfg.acc_thresholds));
      if (layout[k].variant == Variant::kForward || layout[k].variant == Variant::kGeometricRefine) {
        auto& dst = layout[k].variant == Variant::kForward ? iou_fwd : iou_final;
        for (const auto& r : recs) {
          if (r.source == Source::kForward || r.source == Source::kBackward) {
            dst.push_back(iou(*r.box, labels.ground_truth[r.frame_idx]));
          }
        }
      }
    }
    if (n == 0) {
      for (const auto& d : result.frames) {
        trace.frame.push_back(d.frame_idx);
        for (int k = 0; k < 2; ++k) {
          trace.score[k].push_back(d.score[k]);
          trace.target[k].push_back(quality_from_iou(iou(d.tracker[k], labels.ground_truth[d.frame_idx]), cfg.quality));
        }
      }
    }
  }

  AblationTable table;
  for (std::size_t k = 0; k < layout.size(); ++k) table.rows.push_back({layout[k].name, combine_reports(per_row[k])});
  table.text = format_ablation(table.rows, cfg.acc_thresholds);

  OutputGuard guard;
  guard.dir(out);
  write_text_file(guard.file(out / "ablation.txt"), table.text);
  const fs::path plots = guard.dir(out / "plots");
  std::vector<std::string> bar_names;
  std::vector<double> bar_values;
  for (const auto& row : table.rows) {
    bar_names.push_back(row.name);
    bar_values.push_back(row.report.miou);
  }
  write_svg(bar_chart_svg(bar_names, bar_values, {"mIoU by variant", "", "mIoU"}), guard.file(plots / "ablation.svg"));
  write_svg(histogram_svg(iou_fwd, 20, 0.0, 1.0, {"IoU, forward tracking", "IoU", "frames"}),
            guard.file(plots / "iou_hist_fwd.svg"));
  write_svg(histogram_svg(iou_final, 20, 0.0, 1.0, {"IoU, VG-Refine (accepted frames)", "IoU", "frames"}),
            guard.file(plots / "iou_hist_vg_refine.svg"));
  const std::vector<LineSeries> series{{"score fwd", trace.frame, trace.score[0]},
                                       {"target fwd", trace.frame, trace.target[0]},
                                       {"score bwd", trace.frame, trace.score[1]},
                                       {"target bwd", trace.frame, trace.target[1]}};
  const double zero = cfg.inference.failure_threshold;
  write_svg(line_chart_svg(series, {"Quality scores, " + names.front(), "frame", "quality"}, std::span(&zero, 1)),
            guard.file(plots / ("scores_" + names.front() + ".svg")));
  std::vector<LineSeries> curves;
  for (const char* stem : {"assess", "refine", "mask"}) {
    const fs::path p = cfg.checkpoint_path() / (std::string(stem) + "_val.txt");
    if (!fs::exists(p)) continue;
    LineSeries s;
    s.name = std::string(stem) + " val";
    s.y = read_curve_values(p, &s.x);
    curves.push_back(std::move(s));
  }
  if (!curves.empty()) {
    write_svg(line_chart_svg(curves, {"Validation loss", "step", "loss"}), guard.file(plots / "training.svg"));
  }
  guard.commit();
  return table;
}

}  // namespace vidanno
