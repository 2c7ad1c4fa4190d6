// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numeric>
#include <string>

#include "biqa/backbone.hpp"
#include "biqa/binary_io.hpp"
#include "biqa/error.hpp"
#include "biqa/rng.hpp"

namespace biqa {

std::vector<FeatureVector> extract_features(const FeatureExtractor& extractor,
                                            std::span<const Crop> crops,
                                            std::span<const CropKey> keys) {
  if (!keys.empty() && keys.size() != crops.size()) {
    throw UsageError("extract_features: keys and crops differ in length");
  }
  std::vector<FeatureVector> out;
  out.reserve(crops.size());
  const CropKey none;
  for (std::size_t i = 0; i < crops.size(); ++i) {
    out.push_back(extractor.extract(crops[i], keys.empty() ? none : keys[i]));
    if (static_cast<int>(out.back().size()) != extractor.feature_dim()) {
      throw DataError("extractor returned a vector of the wrong length");
    }
  }
  return out;
}

FeatureVector DeskExtractor::extract(const Crop& crop, const CropKey&) const {
  return net_.features(crop);
}

// ---------------------------------------------------------------------------
// Fine-tuning.

void TrainConfig::validate() const {
  if (iterations < 0) throw UsageError("iterations must be >= 0");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw UsageError("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must be in [0, 1)");
  if (!(head_init_std > 0.0)) throw UsageError("head_init_std must be > 0");
  if (frozen_layers < 0 || frozen_layers > 3) throw UsageError("frozen_layers must be in [0, 3]");
}

TrainResult finetune(DeskCnn net, std::span<const TrainingSample> samples, const TrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw DataError("fine-tuning needs at least one training sample");

  net.reset_head(cfg.head_init_std, cfg.seed);

  std::vector<std::vector<float>> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(net.normalize(s.crop));

  // conv1, conv2 and fc1 own two tensors each, in ParamId order.
  const int first_trainable = 2 * cfg.frozen_layers;
  ParamSet<double> velocity;
  for (int p = 0; p < kNumParams; ++p) velocity[p].assign(net.params()[p].size(), 0.0);

  Rng rng(derive_seed(cfg.seed, "finetune-order"));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::size_t cursor = 0;

  TrainResult result;
  result.loss_curve.reserve(static_cast<std::size_t>(cfg.iterations));
  std::vector<std::vector<float>> batch;
  std::vector<QualityClass> labels;
  std::vector<double> weights;
  DeskCnn::Cache cache;
  for (int it = 0; it < cfg.iterations; ++it) {
    batch.clear();
    labels.clear();
    weights.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      const std::size_t i = order[cursor++];
      batch.push_back(inputs[i]);
      labels.push_back(samples[i].label);
      weights.push_back(samples[i].weight);
    }
    const LogitMatrix logits = net.forward_normalized(batch, &cache);
    LossResult loss;
    try {
      loss = weighted_softmax_xent(logits, labels, weights);
    } catch (const NumericError& e) {
      throw NumericError("fine-tuning diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    if (!std::isfinite(loss.loss)) {
      throw NumericError("fine-tuning loss is not finite at iteration " + std::to_string(it));
    }
    result.loss_curve.push_back(loss.loss);
    const ParamSet<double> grads = net.backward(cache, loss.grad);
    for (int p = first_trainable; p < kNumParams; ++p) {
      auto& param = net.params()[p];
      auto& vel = velocity[p];
      for (std::size_t k = 0; k < param.size(); ++k) {
        vel[k] = cfg.momentum * vel[k] - cfg.learning_rate * grads[p][k];
        param[k] = static_cast<float>(param[k] + vel[k]);
        if (!std::isfinite(param[k])) {
          throw NumericError("fine-tuning diverged at iteration " + std::to_string(it) +
                             ": parameter overflow");
        }
      }
    }
  }
  result.net = std::move(net);
  return result;
}

// ---------------------------------------------------------------------------
// Precomputed features.

PrecomputedFeatures::PrecomputedFeatures(int dim, std::string tag,
                                         std::map<CropKey, FeatureVector> table)
    : dim_(dim), tag_(std::move(tag)), table_(std::move(table)) {
  for (const auto& [key, v] : table_) {
    if (static_cast<int>(v.size()) != dim_) {
      throw DataError("feature vector for '" + key.image_id + "' crop " +
                      std::to_string(key.crop_index) + " has length " + std::to_string(v.size()) +
                      ", expected " + std::to_string(dim_));
    }
  }
}

FeatureVector PrecomputedFeatures::extract(const Crop&, const CropKey& key) const {
  const auto it = table_.find(key);
  if (it == table_.end()) {
    throw DataError("no precomputed features for '" + key.image_id + "' crop " +
                    std::to_string(key.crop_index));
  }
  return it->second;
}

PrecomputedFeatures load_precomputed(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::string tag = "precomputed:" + sha256_hex(bytes);
  if (bytes.empty()) return PrecomputedFeatures(0, tag, {});
  ByteReader in(bytes.data(), bytes.size(), path.string());
  if (in.raw(4) != "BIQF") throw DataError(path.string() + ": not a feature file");
  const std::uint32_t version = in.u32();
  if (version != kFeatureFileVersion) {
    throw DataError(path.string() + ": unsupported feature file version " + std::to_string(version));
  }
  const std::uint32_t dim = in.u32();
  const std::uint64_t count = in.u64();
  std::map<CropKey, FeatureVector> table;
  for (std::uint64_t r = 0; r < count; ++r) {
    CropKey key;
    key.image_id = in.str();
    key.crop_index = static_cast<int>(in.u32());
    if (in.remaining() < static_cast<std::size_t>(dim) * 4) {
      throw DataError(path.string() + ": feature vector for '" + key.image_id + "' crop " +
                      std::to_string(key.crop_index) + " is shorter than D=" + std::to_string(dim));
    }
    FeatureVector v(dim);
    for (auto& x : v) x = in.f32();
    if (!table.emplace(key, std::move(v)).second) {
      throw DataError(path.string() + ": duplicate key '" + key.image_id + "' crop " +
                      std::to_string(key.crop_index));
    }
  }
  if (in.remaining() != 0) {
    throw DataError(path.string() + ": " + std::to_string(in.remaining()) +
                    " trailing bytes (record lengths disagree with D=" + std::to_string(dim) + ")");
  }
  return PrecomputedFeatures(static_cast<int>(dim), tag, std::move(table));
}

void write_feature_file(const std::filesystem::path& path, int dim,
                        const std::map<CropKey, FeatureVector>& table) {
  ByteWriter out;
  out.raw("BIQF");
  out.u32(kFeatureFileVersion);
  out.u32(static_cast<std::uint32_t>(dim));
  out.u64(table.size());
  for (const auto& [key, v] : table) {
    if (static_cast<int>(v.size()) != dim) {
      throw DataError("feature vector for '" + key.image_id + "' crop " +
                      std::to_string(key.crop_index) + " has wrong length");
    }
    out.str(key.image_id);
    out.u32(static_cast<std::uint32_t>(key.crop_index));
    for (double x : v) out.f32(static_cast<float>(x));
  }
  write_file_bytes(path, out.bytes());
}

// ---------------------------------------------------------------------------
// Checkpoints.

namespace {

enum LayerType : std::uint8_t { kConv = 1, kRelu = 2, kMaxPool = 3, kFullyConnected = 4 };

struct LayerSpec {
  std::uint8_t type;
  std::int32_t in, out, kernel, stride, pad;
  bool operator==(const LayerSpec&) const = default;
};

std::vector<LayerSpec> layer_specs(const DeskArchitecture& a) {
  using A = DeskArchitecture;
  return {
      {kConv, 3, A::kConv1Filters, A::kConv1Kernel, A::kConv1Stride, 0},
      {kRelu, 0, 0, 0, 0, 0},
      {kMaxPool, 0, 0, A::kPool, A::kPool, 0},
      {kConv, A::kConv1Filters, A::kConv2Filters, A::kConv2Kernel, 1, A::kConv2Pad},
      {kRelu, 0, 0, 0, 0, 0},
      {kMaxPool, 0, 0, A::kPool, A::kPool, 0},
      {kFullyConnected, a.flat_size(), a.feature_dim, 0, 0, 0},
      {kRelu, 0, 0, 0, 0, 0},
      {kFullyConnected, a.feature_dim, A::kClasses, 0, 0, 0},
  };
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const DeskCnn& net) {
  const DeskArchitecture& a = net.arch();
  ByteWriter out;
  out.raw("BIQC");
  out.u32(kCheckpointVersion);
  out.i32(a.input_size);
  out.i32(a.feature_dim);
  out.f32(a.input_scale);
  for (float m : a.mean) out.f32(m);
  const auto specs = layer_specs(a);
  out.u32(static_cast<std::uint32_t>(specs.size()));
  for (const auto& s : specs) {
    out.u8(s.type);
    out.i32(s.in);
    out.i32(s.out);
    out.i32(s.kernel);
    out.i32(s.stride);
    out.i32(s.pad);
  }
  out.u32(kNumParams);
  for (int p = 0; p < kNumParams; ++p) {
    out.str(param_name(static_cast<ParamId>(p)));
    const auto shape = net.param_shape(static_cast<ParamId>(p));
    out.u32(static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) out.u32(static_cast<std::uint32_t>(d));
    for (float v : net.params()[p]) out.f32(v);
  }
  auto bytes = out.take();
  const std::uint32_t crc = crc32_of(bytes.data(), bytes.size());
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
  return bytes;
}

DeskCnn deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& context) {
  if (bytes.size() < 8) throw DataError(context + ": truncated checkpoint");
  const std::size_t body = bytes.size() - 4;
  ByteReader tail(bytes.data() + body, 4, context);
  if (tail.u32() != crc32_of(bytes.data(), body)) {
    throw DataError(context + ": checkpoint checksum mismatch (corrupted or truncated)");
  }
  ByteReader in(bytes.data(), body, context);
  if (in.raw(4) != "BIQC") throw DataError(context + ": not a network checkpoint");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw DataError(context + ": unsupported checkpoint version " + std::to_string(version));
  }
  DeskArchitecture a;
  a.input_size = in.i32();
  a.feature_dim = in.i32();
  a.input_scale = in.f32();
  for (auto& m : a.mean) m = in.f32();
  a.validate();
  const auto expected = layer_specs(a);
  const std::uint32_t n_layers = in.u32();
  std::vector<LayerSpec> specs(n_layers);
  for (auto& s : specs) {
    s.type = in.u8();
    s.in = in.i32();
    s.out = in.i32();
    s.kernel = in.i32();
    s.stride = in.i32();
    s.pad = in.i32();
  }
  if (specs != expected) throw DataError(context + ": unsupported layer stack");

  DeskCnn net(a);
  if (in.u32() != kNumParams) throw DataError(context + ": wrong tensor count");
  for (int p = 0; p < kNumParams; ++p) {
    const std::string name = in.str();
    if (name != param_name(static_cast<ParamId>(p))) {
      throw DataError(context + ": unexpected tensor '" + name + "'");
    }
    const auto shape = net.param_shape(static_cast<ParamId>(p));
    const std::uint32_t ndim = in.u32();
    if (ndim != shape.size()) throw DataError(context + ": bad rank for " + name);
    for (int d : shape) {
      if (in.u32() != static_cast<std::uint32_t>(d)) throw DataError(context + ": bad shape for " + name);
    }
    for (auto& v : net.params()[p]) v = in.f32();
  }
  if (in.remaining() != 0) throw DataError(context + ": trailing bytes in checkpoint");
  return net;
}

std::string save_checkpoint(const DeskCnn& net, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(net);
  write_file_bytes(path, bytes);
  return sha256_hex(bytes);
}

DeskCnn load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file_bytes(path), path.string());
}

}  // namespace biqa
