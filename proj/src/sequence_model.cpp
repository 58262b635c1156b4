// Copyright 2026 The vidanno Authors
// SPDX-License-Identifier: Apache-2.0

#include "sequence_model.hpp"

#include "common.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace vidanno {

using nn::Matrix;

FrameBatch make_frame_batch(std::span<const BatchItem> items, int map_size) {
  FrameBatch fb;
  if (items.empty()) return fb;
  fb.steps = items.front().window->length;
  fb.batch = static_cast<int>(items.size());
  fb.map_size = map_size;
  const int rr = map_size * map_size;
  fb.maps.resize(1, static_cast<Eigen::Index>(fb.frames()) * rr);
  fb.tail.resize(5, fb.frames());
  fb.valid.assign(fb.frames(), false);
  for (int b = 0; b < fb.batch; ++b) {
    const Window& w = *items[b].window;
    const double W = items[b].frame_width;
    const double H = items[b].frame_height;
    if (w.length != fb.steps) throw_invalid("windows in a batch must share a length");
    for (int t = 0; t < fb.steps; ++t) {
      const TrackedFrame& f = w.frames[t];
      const int col = t * fb.batch + b;
      if (!f.response || f.response->rows() != map_size || f.response->cols() != map_size) {
        throw_invalid("frame " + std::to_string(f.frame_idx) + ": response map must be " +
                      std::to_string(map_size) + "x" + std::to_string(map_size));
      }
      const float* src = f.response->data();
      double* dst = fb.maps.data() + static_cast<Eigen::Index>(col) * rr;
      for (int k = 0; k < rr; ++k) {
        if (!std::isfinite(src[k])) {
          throw_invalid("frame " + std::to_string(f.frame_idx) + ": non-finite response map value");
        }
        dst[k] = src[k];
      }
      fb.tail(0, col) = f.box.x_min / W;
      fb.tail(1, col) = f.box.y_min / H;
      fb.tail(2, col) = f.box.x_max / W;
      fb.tail(3, col) = f.box.y_max / H;
      fb.tail(4, col) = f.confidence;
      fb.valid[col] = w.valid_mask[t];
    }
  }
  return fb;
}

FrameBatch make_frame_batch(std::span<const Window> windows, const VideoMeta& meta, int map_size) {
  std::vector<BatchItem> items;
  items.reserve(windows.size());
  for (const auto& w : windows) items.push_back({&w, meta.frame_width, meta.frame_height});
  return make_frame_batch(std::span<const BatchItem>(items), map_size);
}

// ---------------------------------------------------------------------------

FeatureExtractor::FeatureExtractor(const ModelConfig& cfg) : map_size_(cfg.map_size) {
  int in = 1;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    convs_.emplace_back("extractor.conv" + std::to_string(i), in, cfg.conv_channels[i], 3, 2, 1,
                        nn::Activation::kRelu);
    in = cfg.conv_channels[i];
  }
  projection_ = nn::Linear("extractor.proj", in, cfg.features);
}

void FeatureExtractor::init(std::mt19937_64& rng) {
  for (auto& c : convs_) c.init(rng);
  projection_.init(rng);
}

nn::ParameterRefs FeatureExtractor::parameters() {
  nn::ParameterRefs out;
  for (auto& c : convs_) {
    for (auto* p : c.parameters()) out.push_back(p);
  }
  for (auto* p : projection_.parameters()) out.push_back(p);
  return out;
}

Matrix FeatureExtractor::forward(const Matrix& maps, int frames, Cache* cache) const {
  Matrix x = maps;
  int size = map_size_;
  if (cache) {
    cache->conv.assign(convs_.size(), {});
    cache->sizes.clear();
  }
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    if (cache) cache->sizes.push_back(size);
    x = convs_[i].forward(x, frames, size, size, cache ? &cache->conv[i] : nullptr);
    size = convs_[i].out_size(size);
  }
  if (cache) cache->sizes.push_back(size);
  Matrix pooled = nn::global_average(x, frames, size * size);
  Matrix out = projection_.forward(pooled);
  if (cache) cache->pooled = std::move(pooled);
  return out;
}

void FeatureExtractor::backward(const Matrix& d_features, const Cache& cache) {
  Matrix d = projection_.backward(d_features, cache.pooled);
  const int frames = static_cast<int>(cache.pooled.cols());
  const int last = cache.sizes.back();
  d = nn::global_average_backward(d, frames, last * last);
  for (int i = static_cast<int>(convs_.size()) - 1; i >= 0; --i) {
    d = convs_[i].backward(d, cache.conv[i]);
  }
}

// ---------------------------------------------------------------------------

SequencePredictor::SequencePredictor(const ModelConfig& cfg, const std::string& prefix) {
  int in = cfg.frame_feature_size();
  for (int l = 0; l < cfg.layers; ++l) {
    layers_.emplace_back(prefix + ".layer" + std::to_string(l), cfg.kind, in, cfg.hidden);
    in = cfg.hidden;
  }
  head_ = nn::Linear(prefix + ".head", in, cfg.outputs);
}

void SequencePredictor::init(std::mt19937_64& rng) {
  for (auto& l : layers_) l.init(rng);
  head_.init(rng);
}

nn::ParameterRefs SequencePredictor::parameters() {
  nn::ParameterRefs out;
  for (auto& l : layers_) {
    for (auto* p : l.parameters()) out.push_back(p);
  }
  for (auto* p : head_.parameters()) out.push_back(p);
  return out;
}

Matrix SequencePredictor::forward(const Matrix& x, int steps, int batch, Cache* cache) const {
  Matrix h = x;
  if (cache) cache->layers.assign(layers_.size(), {});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    h = layers_[l].forward(h, steps, batch, cache ? &cache->layers[l] : nullptr);
  }
  Matrix out = head_.forward(h);
  if (cache) cache->top = std::move(h);
  return out;
}

Matrix SequencePredictor::backward(const Matrix& d_out, const Cache& cache) {
  Matrix d = head_.backward(d_out, cache.top);
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    d = layers_[l].backward(d, cache.layers[l]);
  }
  return d;
}

// ---------------------------------------------------------------------------

DirectionalModel::DirectionalModel(const ModelConfig& cfg)
    : cfg_(cfg),
      extractor_(cfg),
      predictors_{SequencePredictor(cfg, "forward"), SequencePredictor(cfg, "backward")} {
  std::mt19937_64 rng(cfg.seed);
  extractor_.init(rng);
  for (auto& p : predictors_) p.init(rng);
}

nn::ParameterRefs DirectionalModel::parameters() {
  nn::ParameterRefs out = extractor_.parameters();
  for (auto& pred : predictors_) {
    for (auto* p : pred.parameters()) out.push_back(p);
  }
  return out;
}

Matrix DirectionalModel::features(const FrameBatch& batch, FeatureExtractor::Cache* cache) const {
  if (batch.map_size != cfg_.map_size) throw_invalid("frame batch map size does not match the model");
  Matrix feats = extractor_.forward(batch.maps, batch.frames(), cache);
  Matrix inputs(cfg_.frame_feature_size(), batch.frames());
  inputs.topRows(cfg_.features) = feats;
  inputs.bottomRows(5) = batch.tail;
  return inputs;
}

Matrix DirectionalModel::forward(const FrameBatch& batch, Direction direction, Cache* cache) const {
  if (batch.steps != cfg_.window_length) {
    throw_invalid("window length " + std::to_string(batch.steps) + " does not match model length " +
                  std::to_string(cfg_.window_length));
  }
  Matrix inputs = features(batch, cache ? &cache->extractor : nullptr);
  Matrix out = predictors_[index_of(direction)].forward(inputs, batch.steps, batch.batch,
                                                        cache ? &cache->predictor : nullptr);
  if (cache) {
    cache->inputs = std::move(inputs);
    cache->steps = batch.steps;
    cache->batch = batch.batch;
  }
  return out;
}

void DirectionalModel::backward(const Matrix& d_out, Direction direction, const Cache& cache) {
  Matrix d_inputs = predictors_[index_of(direction)].backward(d_out, cache.predictor);
  extractor_.backward(d_inputs.topRows(cfg_.features), cache.extractor);
}

// ---------------------------------------------------------------------------

std::string model_config_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["map_size"] = cfg.map_size;
  j["conv_channels"] = cfg.conv_channels;
  j["features"] = cfg.features;
  j["hidden"] = cfg.hidden;
  j["layers"] = cfg.layers;
  j["kind"] = nn::to_string(cfg.kind);
  j["outputs"] = cfg.outputs;
  j["window_length"] = cfg.window_length;
  j["seed"] = cfg.seed;
  return j.dump();
}

namespace {

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.map_size = j.at("map_size").get<int>();
  cfg.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  cfg.features = j.at("features").get<int>();
  cfg.hidden = j.at("hidden").get<int>();
  cfg.layers = j.at("layers").get<int>();
  cfg.kind = nn::parse_sequence_kind(j.at("kind").get<std::string>());
  cfg.outputs = j.at("outputs").get<int>();
  cfg.window_length = j.at("window_length").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

struct RawCheckpoint {
  nlohmann::json manifest;
  std::streamoff data_offset = 0;
};

RawCheckpoint open_checkpoint(const std::filesystem::path& path, std::ifstream& in) {
  in.open(path, std::ios::binary);
  if (!in) throw_not_found("checkpoint not found: " + path.string());
  std::string magic, manifest;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw_format(path.string() + ": not a checkpoint file");
  std::getline(in, manifest);
  RawCheckpoint raw;
  try {
    raw.manifest = nlohmann::json::parse(manifest);
  } catch (const std::exception& e) {
    throw_format(path.string() + ": bad checkpoint manifest: " + e.what());
  }
  raw.data_offset = in.tellg();
  return raw;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointInfo& info,
                     const nn::ParameterRefs& params) {
  nlohmann::json manifest;
  manifest["kind"] = info.kind;
  manifest["config"] = nlohmann::json::parse(model_config_json(info.config));
  manifest["metadata"] = nlohmann::json::parse(info.metadata_json);
  nlohmann::json plist = nlohmann::json::array();
  for (const auto* p : params) {
    plist.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  manifest["params"] = plist;
  AtomicFile file(path);
  file.write(kCheckpointMagic);
  file.write("\n");
  file.write(manifest.dump());
  file.write("\n");
  for (const auto* p : params) {
    file.write(std::string_view(reinterpret_cast<const char*>(p->value.data()),
                                sizeof(double) * static_cast<std::size_t>(p->value.size())));
  }
  file.commit();
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  std::ifstream in;
  RawCheckpoint raw = open_checkpoint(path, in);
  CheckpointInfo info;
  try {
    info.kind = raw.manifest.at("kind").get<std::string>();
    info.config = config_from_json(raw.manifest.at("config"));
    info.metadata_json = raw.manifest.value("metadata", nlohmann::json::object()).dump();
  } catch (const nlohmann::json::exception& e) {
    throw_format(path.string() + ": incomplete checkpoint manifest: " + e.what());
  }
  return info;
}

void load_checkpoint_values(const std::filesystem::path& path, const nn::ParameterRefs& params) {
  std::ifstream in;
  RawCheckpoint raw = open_checkpoint(path, in);
  const auto& plist = raw.manifest.at("params");
  if (plist.size() != params.size()) {
    throw_format(path.string() + ": checkpoint holds " + std::to_string(plist.size()) +
                 " parameters, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    const auto& e = plist[i];
    if (e.at("name").get<std::string>() != p->name || e.at("rows").get<Eigen::Index>() != p->value.rows() ||
        e.at("cols").get<Eigen::Index>() != p->value.cols()) {
      throw_format(path.string() + ": parameter mismatch at " + p->name);
    }
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    if (!in) throw_format(path.string() + ": truncated checkpoint at " + p->name);
  }
}

}  // namespace vidanno
