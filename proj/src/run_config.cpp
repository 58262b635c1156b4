// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include "common.hpp"

#include <cstdlib>
#include <functional>
#include <map>

namespace vidanno {

namespace {

struct Field {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Acc>
Field int_field(Acc acc) {
  return {[acc](RunConfig& c, std::string_view v) { acc(c) = static_cast<int>(parse_int(v)); },
          [acc](const RunConfig& c) { return std::to_string(acc(const_cast<RunConfig&>(c))); }};
}

template <typename Acc>
Field i64_field(Acc acc) {
  return {[acc](RunConfig& c, std::string_view v) { acc(c) = parse_int(v); },
          [acc](const RunConfig& c) { return std::to_string(acc(const_cast<RunConfig&>(c))); }};
}

template <typename Acc>
Field double_field(Acc acc) {
  return {[acc](RunConfig& c, std::string_view v) { acc(c) = parse_double(v); },
          [acc](const RunConfig& c) { return format_double(acc(const_cast<RunConfig&>(c))); }};
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw_invalid("expected true or false, got '" + std::string(v) + "'");
}

template <typename Acc>
Field bool_field(Acc acc) {
  return {[acc](RunConfig& c, std::string_view v) { acc(c) = parse_bool(v); },
          [acc](const RunConfig& c) { return std::string(acc(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <typename Acc>
Field string_field(Acc acc) {
  return {[acc](RunConfig& c, std::string_view v) { acc(c) = std::string(v); },
          [acc](const RunConfig& c) { return acc(const_cast<RunConfig&>(c)); }};
}

template <typename Acc, typename Parse, typename Print>
Field enum_field(Acc acc, Parse parse, Print print) {
  return {[acc, parse](RunConfig& c, std::string_view v) { acc(c) = parse(std::string(v)); },
          [acc, print](const RunConfig& c) { return std::string(print(acc(const_cast<RunConfig&>(c)))); }};
}

std::vector<std::string_view> list_items(std::string_view v) {
  std::vector<std::string_view> out;
  if (trim(v).empty()) return out;
  for (auto item : split(v, ',')) out.push_back(trim(item));
  return out;
}

template <typename Acc>
Field int_list_field(Acc acc) {
  return {[acc](RunConfig& c, std::string_view v) {
            std::vector<int> out;
            for (auto item : list_items(v)) out.push_back(static_cast<int>(parse_int(item)));
            acc(c) = out;
          },
          [acc](const RunConfig& c) {
            std::string s;
            for (int x : acc(const_cast<RunConfig&>(c))) s += (s.empty() ? "" : ",") + std::to_string(x);
            return s;
          }};
}

template <typename Acc>
Field double_list_field(Acc acc) {
  return {[acc](RunConfig& c, std::string_view v) {
            std::vector<double> out;
            for (auto item : list_items(v)) out.push_back(parse_double(item));
            acc(c) = out;
          },
          [acc](const RunConfig& c) {
            std::string s;
            for (double x : acc(const_cast<RunConfig&>(c))) s += (s.empty() ? "" : ",") + format_double(x);
            return s;
          }};
}

template <typename Acc>
Field string_list_field(Acc acc) {
  return {[acc](RunConfig& c, std::string_view v) {
            std::vector<std::string> out;
            for (auto item : list_items(v)) out.emplace_back(item);
            acc(c) = out;
          },
          [acc](const RunConfig& c) {
            std::string s;
            for (const auto& x : acc(const_cast<RunConfig&>(c))) s += (s.empty() ? "" : ",") + x;
            return s;
          }};
}

#define VA_ACC(member) [](RunConfig& c) -> auto& { return c.member; }

void add_net(std::map<std::string, Field>& m, const std::string& prefix, NetConfig RunConfig::*net) {
  m[prefix + ".features"] = int_field([net](RunConfig& c) -> auto& { return (c.*net).features; });
  m[prefix + ".hidden"] = int_field([net](RunConfig& c) -> auto& { return (c.*net).hidden; });
  m[prefix + ".layers"] = int_field([net](RunConfig& c) -> auto& { return (c.*net).layers; });
  m[prefix + ".kind"] = enum_field([net](RunConfig& c) -> auto& { return (c.*net).kind; }, nn::parse_sequence_kind,
                                   [](nn::SequenceKind k) { return nn::to_string(k); });
  m[prefix + ".conv_channels"] = int_list_field([net](RunConfig& c) -> auto& { return (c.*net).conv_channels; });
}

void add_train(std::map<std::string, Field>& m, const std::string& prefix, TrainConfig RunConfig::*tc) {
  m[prefix + ".learning_rate"] = double_field([tc](RunConfig& c) -> auto& { return (c.*tc).learning_rate; });
  m[prefix + ".batch_size"] = int_field([tc](RunConfig& c) -> auto& { return (c.*tc).batch_size; });
  m[prefix + ".epochs"] = int_field([tc](RunConfig& c) -> auto& { return (c.*tc).epochs; });
  m[prefix + ".grad_clip"] = double_field([tc](RunConfig& c) -> auto& { return (c.*tc).grad_clip; });
  m[prefix + ".max_steps"] = i64_field([tc](RunConfig& c) -> auto& { return (c.*tc).max_steps; });
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> m;
    m["seed"] = {[](RunConfig& c, std::string_view v) {
                   const long long s = parse_int(v);
                   if (s < 0) throw_invalid("seed must be non-negative");
                   c.seed = static_cast<std::uint64_t>(s);
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    m["threads"] = int_field(VA_ACC(threads));
    m["paths.data"] = string_field(VA_ACC(data_dir));
    m["paths.checkpoints"] = string_field(VA_ACC(checkpoint_dir));
    m["paths.output"] = string_field(VA_ACC(output_dir));
    m["video.anchor_interval"] = int_field(VA_ACC(anchor_interval));
    m["window.length"] = int_field(VA_ACC(window_length));
    m["window.stride"] = int_field(VA_ACC(window_stride));
    m["map.size"] = int_field(VA_ACC(map_size));
    m["map.resize"] = bool_field(VA_ACC(map_resize));
    add_net(m, "assess", &RunConfig::assess);
    m["quality.alpha"] = double_field(VA_ACC(quality.alpha));
    m["quality.beta"] = double_field(VA_ACC(quality.beta));
    add_train(m, "train", &RunConfig::train);
    m["train.restore_best"] = bool_field(VA_ACC(train.restore_best));
    add_net(m, "refine", &RunConfig::refine_net);
    add_train(m, "refine", &RunConfig::refine_train);
    m["refine.aggregation"] = enum_field(VA_ACC(aggregation), parse_aggregation,
                                         [](Aggregation a) { return to_string(a); });
    m["refine.mask_predictor"] = string_field(VA_ACC(mask_predictor));
    m["refine.mask_rows"] = int_field(VA_ACC(mask_rows));
    m["refine.mask_cols"] = int_field(VA_ACC(mask_cols));
    m["refine.mode"] = enum_field(VA_ACC(refine_mode), parse_refine_mode, [](RefineMode r) { return to_string(r); });
    m["mask.channels"] = int_field(VA_ACC(mask_channels));
    add_train(m, "mask", &RunConfig::mask_train);
    m["mask.item_stride"] = int_field(VA_ACC(mask_item_stride));
    m["infer.tau"] = double_field(VA_ACC(inference.tau));
    m["infer.failure_threshold"] = double_field(VA_ACC(inference.failure_threshold));
    m["split.train_fraction"] = double_field(VA_ACC(train_fraction));
    m["split.validation_fraction"] = double_field(VA_ACC(validation_fraction));
    m["annotate.sequences"] = string_list_field(VA_ACC(annotate_sequences));
    m["eval.acc_thresholds"] = double_list_field(VA_ACC(acc_thresholds));
    m["eval.annotations"] = string_field(VA_ACC(eval_annotations));
    m["eval.ground_truth"] = string_field(VA_ACC(eval_ground_truth));
    m["synth.count"] = int_field(VA_ACC(synth_count));
    m["synth.frame_count"] = int_field(VA_ACC(synth.frame_count));
    m["synth.width"] = int_field(VA_ACC(synth.width));
    m["synth.height"] = int_field(VA_ACC(synth.height));
    m["synth.p_drift"] = double_field(VA_ACC(synth.p_drift));
    m["synth.drift_rate"] = double_field(VA_ACC(synth.drift_rate));
    m["synth.sigma_pos"] = double_field(VA_ACC(synth.sigma_pos));
    m["synth.sigma_scale"] = double_field(VA_ACC(synth.sigma_scale));
    m["synth.occlusion_rate"] = double_field(VA_ACC(synth.occlusion_rate));
    m["synth.occlusion_gain"] = double_field(VA_ACC(synth.occlusion_gain));
    m["synth.response_noise"] = double_field(VA_ACC(synth.response_noise));
    m["synth.distractors"] = int_field(VA_ACC(synth.distractors));
    m["synth.mask_noise_density"] = double_field(VA_ACC(synth.mask_noise_density));
    return m;
  }();
  return table;
}

#undef VA_ACC

}  // namespace

RunConfig::RunConfig() {
  mask_train.epochs = 5;
  mask_train.batch_size = 16;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, f] : fields()) out.push_back(key);
    return out;
  }();
  return k;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto it = fields().find(std::string(key));
  if (it == fields().end()) throw_invalid("unknown config key '" + std::string(key) + "'");
  try {
    it->second.set(*this, trim(value));
  } catch (const Error& e) {
    throw_invalid(std::string(key) + ": " + e.what());
  }
}

std::string RunConfig::get(std::string_view key) const {
  const auto it = fields().find(std::string(key));
  if (it == fields().end()) throw_invalid("unknown config key '" + std::string(key) + "'");
  return it->second.get(*this);
}

void RunConfig::load_text(std::string_view text, const std::string& origin) {
  int line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    try {
      if (eq == std::string_view::npos) throw_invalid("expected key = value");
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const Error& e) {
      throw_invalid(origin + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) { load_text(read_text_file(path), path.string()); }

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw_invalid("override '" + std::string(assignment) + "' is not key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [key, f] : fields()) out += key + " = " + f.get(*this) + '\n';
  return out;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw_invalid(what);
  };
  require(threads >= 0, "threads must be non-negative");
  require(anchor_interval >= 1, "video.anchor_interval must be positive");
  require(window_length >= 2, "window.length must be at least 2");
  require(window_stride >= 1, "window.stride must be positive");
  require(map_size >= 4, "map.size must be at least 4");
  for (const auto* n : {&assess, &refine_net}) {
    require(n->features >= 1 && n->hidden >= 1 && n->layers >= 1, "network sizes must be positive");
    require(!n->conv_channels.empty(), "conv_channels must list at least one stage");
    for (int c : n->conv_channels) require(c >= 1, "conv_channels entries must be positive");
  }
  vidanno::validate(quality);
  for (const auto* t : {&train, &refine_train, &mask_train}) {
    require(t->learning_rate >= 0, "learning rates must be non-negative");
    require(t->batch_size >= 1, "batch sizes must be positive");
    require(t->epochs >= 0, "epoch counts must be non-negative");
    require(t->grad_clip >= 0, "grad_clip must be non-negative");
    require(t->max_steps >= 0, "max_steps must be non-negative");
  }
  require(mask_predictor == "oracle" || mask_predictor == "conv", "refine.mask_predictor must be oracle or conv");
  require(mask_rows >= 2 && mask_cols >= 2, "mask grid must be at least 2x2");
  require(mask_channels >= 1, "mask.channels must be positive");
  require(mask_item_stride >= 1, "mask.item_stride must be positive");
  vidanno::validate(inference);
  require(train_fraction > 0 && train_fraction < 1, "split.train_fraction must lie in (0, 1)");
  require(validation_fraction >= 0 && validation_fraction < 1, "split.validation_fraction must lie in [0, 1)");
  for (double t : acc_thresholds) require(t >= 0 && t <= 1, "eval.acc_thresholds must lie in [0, 1]");
  require(eval_annotations.empty() == eval_ground_truth.empty(),
          "eval.annotations and eval.ground_truth must be set together");
  require(synth_count >= 1, "synth.count must be positive");
  SynthConfig s = synth;
  s.anchor_interval = anchor_interval;
  s.map_size = map_size;
  vidanno::validate(s);
}

ModelConfig RunConfig::assess_model() const {
  ModelConfig m;
  m.map_size = map_size;
  m.conv_channels = assess.conv_channels;
  m.features = assess.features;
  m.hidden = assess.hidden;
  m.layers = assess.layers;
  m.kind = assess.kind;
  m.outputs = 1;
  m.window_length = window_length;
  m.seed = mix_seed(seed, 11);
  return m;
}

ModelConfig RunConfig::refine_model() const {
  ModelConfig m;
  m.map_size = map_size;
  m.conv_channels = refine_net.conv_channels;
  m.features = refine_net.features;
  m.hidden = refine_net.hidden;
  m.layers = refine_net.layers;
  m.kind = refine_net.kind;
  m.outputs = 5;
  m.window_length = window_length;
  m.seed = mix_seed(seed, 12);
  return m;
}

AnnotateConfig RunConfig::annotate_config() const {
  AnnotateConfig a;
  a.window_length = window_length;
  a.stride = window_stride;
  a.inference = inference;
  a.refine = refine_mode;
  a.rows = mask_rows;
  a.cols = mask_cols;
  return a;
}

RefineTrainConfig RunConfig::refine_train_config() const {
  RefineTrainConfig r;
  r.train = refine_train;
  r.train.seed = mix_seed(seed, 22);
  r.aggregation = aggregation;
  r.rows = mask_rows;
  r.cols = mask_cols;
  return r;
}

std::filesystem::path resolve_output_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("VIDANNO_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / p;
  return p;
}

std::filesystem::path RunConfig::data_path() const { return resolve_output_path(data_dir); }
std::filesystem::path RunConfig::checkpoint_path() const { return resolve_output_path(checkpoint_dir); }
std::filesystem::path RunConfig::output_path() const { return resolve_output_path(output_dir); }

}  // namespace vidanno
