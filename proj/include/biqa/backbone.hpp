// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "biqa/dataset.hpp"
#include "biqa/imageops.hpp"

namespace biqa {

using FeatureVector = std::vector<double>;

// Identifies a crop for extractors that look features up instead of
// computing them.
struct CropKey {
  std::string image_id;
  int crop_index = 0;

  auto operator<=>(const CropKey&) const = default;
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;

  // Square input side, or 0 when pixels are ignored.
  virtual int input_size() const = 0;
  virtual int feature_dim() const = 0;
  // Stable identifier of the parameters (checkpoint hash or feature source).
  virtual std::string source_tag() const = 0;
  // `crop` holds raw pixels; any normalisation is the extractor's job.
  virtual FeatureVector extract(const Crop& crop, const CropKey& key) const = 0;
};

std::vector<FeatureVector> extract_features(const FeatureExtractor& extractor,
                                            std::span<const Crop> crops,
                                            std::span<const CropKey> keys);

// ---------------------------------------------------------------------------
// Desk-scale CNN:
//   conv 5x5/2 (8) -> relu -> maxpool 2/2 -> conv 3x3/1 pad 1 (16) -> relu
//   -> maxpool 2/2 -> fc (D) -> relu -> fc (5)
// The features are the D post-ReLU activations feeding the last layer.

struct DeskArchitecture {
  static constexpr int kConv1Filters = 8;
  static constexpr int kConv1Kernel = 5;
  static constexpr int kConv1Stride = 2;
  static constexpr int kConv2Filters = 16;
  static constexpr int kConv2Kernel = 3;
  static constexpr int kConv2Pad = 1;
  static constexpr int kPool = 2;
  static constexpr int kClasses = kNumQualityClasses;

  int input_size = 64;
  int feature_dim = 64;
  // Inputs are (pixel - mean) * input_scale.
  std::array<float, 3> mean{127.5f, 127.5f, 127.5f};
  float input_scale = 1.0f / 64.0f;

  int conv1_out() const { return (input_size - kConv1Kernel) / kConv1Stride + 1; }
  int pool1_out() const { return conv1_out() / kPool; }
  int conv2_out() const { return pool1_out() + 2 * kConv2Pad - kConv2Kernel + 1; }
  int pool2_out() const { return conv2_out() / kPool; }
  int flat_size() const { return kConv2Filters * pool2_out() * pool2_out(); }

  // Throws UsageError when the spatial arithmetic collapses.
  void validate() const;
  bool operator==(const DeskArchitecture&) const = default;
};

enum ParamId : int {
  kConv1W,
  kConv1B,
  kConv2W,
  kConv2B,
  kFc1W,
  kFc1B,
  kFc2W,
  kFc2B,
  kNumParams
};

const char* param_name(ParamId id);

template <typename T>
using ParamSet = std::array<std::vector<T>, kNumParams>;

// Logits or their gradients, row-major B x 5.
struct LogitMatrix {
  int rows = 0;
  std::vector<double> values;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * kNumQualityClasses + c]; }
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * kNumQualityClasses + c]; }
};

template <typename T>
class BasicDeskCnn {
 public:
  // Activations kept for the backward pass, one entry per sample.
  struct SampleCache {
    std::vector<T> input;  // CHW, normalised
    std::vector<T> conv1;  // pre-activation
    std::vector<T> pool1;
    std::vector<int> pool1_arg;
    std::vector<T> conv2;
    std::vector<T> pool2;
    std::vector<int> pool2_arg;
    std::vector<T> fc1;  // pre-activation
    std::vector<T> features;
  };
  struct Cache {
    const BasicDeskCnn* owner = nullptr;
    std::vector<SampleCache> samples;
  };

  BasicDeskCnn() : BasicDeskCnn(DeskArchitecture{}) {}
  // All parameters zero.
  explicit BasicDeskCnn(DeskArchitecture arch);

  // He-normal weights, zero biases; the head uses std 0.01.
  static BasicDeskCnn initialized(DeskArchitecture arch, std::uint64_t seed);

  const DeskArchitecture& arch() const { return arch_; }
  const ParamSet<T>& params() const { return params_; }
  ParamSet<T>& params() { return params_; }
  std::size_t parameter_count() const;

  // Parameter tensor shapes (out, in, kh, kw) / (out, in) / (out).
  std::vector<int> param_shape(ParamId id) const;

  // Mean subtraction and scaling into CHW order.
  std::vector<T> normalize(const Crop& crop) const;

  // Crops carry raw pixels. Throws DataError on size mismatch.
  LogitMatrix forward(std::span<const Crop> batch, Cache* cache = nullptr) const;
  LogitMatrix forward_normalized(std::span<const std::vector<T>> inputs, Cache* cache = nullptr) const;

  // Gradients of sum_i <grad_logits_i, logits_i>, accumulated in double.
  ParamSet<double> backward(const Cache& cache, const LogitMatrix& grad_logits) const;

  FeatureVector features(const Crop& crop) const;

  // Reinitialises the classification layer: N(0, std^2) weights, zero bias.
  void reset_head(double std, std::uint64_t seed);

  template <typename U>
  BasicDeskCnn<U> cast() const {
    BasicDeskCnn<U> out(arch_);
    for (int p = 0; p < kNumParams; ++p) {
      out.params()[p].assign(params_[p].begin(), params_[p].end());
    }
    return out;
  }

  bool operator==(const BasicDeskCnn&) const = default;

 private:
  void forward_one(const std::vector<T>& input, SampleCache& s) const;

  DeskArchitecture arch_;
  ParamSet<T> params_;
};

using DeskCnn = BasicDeskCnn<float>;

struct LossResult {
  double loss = 0.0;
  LogitMatrix grad;
};

// loss = (1/B) sum_i w_i * (-log softmax(logits_i)[label_i]) and its
// gradient. Throws NumericError on non-finite logits, UsageError on
// non-positive weights.
LossResult weighted_softmax_xent(const LogitMatrix& logits, std::span<const QualityClass> labels,
                                 std::span<const double> weights);

// ---------------------------------------------------------------------------
// Fine-tuning.

struct TrainConfig {
  int iterations = 2000;
  int batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double head_init_std = 0.01;
  // Number of leading parameterised layers (conv1, conv2, fc1) kept fixed.
  int frozen_layers = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainingSample {
  Crop crop;  // raw pixels, input_size x input_size
  QualityClass label = QualityClass::kBad;
  double weight = 1.0;
};

struct TrainResult {
  DeskCnn net;
  std::vector<double> loss_curve;  // mini-batch loss per iteration
};

// Replaces the head, then runs SGD with momentum over seeded shuffles of
// `samples`. Throws DataError for an empty set, NumericError if the loss
// stops being finite.
TrainResult finetune(DeskCnn net, std::span<const TrainingSample> samples, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Extractors.

class DeskExtractor final : public FeatureExtractor {
 public:
  DeskExtractor(DeskCnn net, std::string tag) : net_(std::move(net)), tag_(std::move(tag)) {}

  int input_size() const override { return net_.arch().input_size; }
  int feature_dim() const override { return net_.arch().feature_dim; }
  std::string source_tag() const override { return tag_; }
  FeatureVector extract(const Crop& crop, const CropKey& key) const override;

  const DeskCnn& net() const { return net_; }

 private:
  DeskCnn net_;
  std::string tag_;
};

class PrecomputedFeatures final : public FeatureExtractor {
 public:
  PrecomputedFeatures(int dim, std::string tag, std::map<CropKey, FeatureVector> table);

  int input_size() const override { return 0; }
  int feature_dim() const override { return dim_; }
  std::string source_tag() const override { return tag_; }
  // Ignores pixels; throws DataError if `key` is absent.
  FeatureVector extract(const Crop& crop, const CropKey& key) const override;

  std::size_t size() const { return table_.size(); }
  bool contains(const CropKey& key) const { return table_.count(key) != 0; }
  const std::map<CropKey, FeatureVector>& table() const { return table_; }

 private:
  int dim_;
  std::string tag_;
  std::map<CropKey, FeatureVector> table_;
};

// Feature file: "BIQF", u32 version, u32 D, u64 count, then per record
// u32 id length, id bytes, u32 crop index, D little-endian float32.
inline constexpr std::uint32_t kFeatureFileVersion = 1;

PrecomputedFeatures load_precomputed(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, int dim,
                        const std::map<CropKey, FeatureVector>& table);

// Network checkpoint: "BIQC", u32 version, architecture, layer specs, named
// float32 tensors, CRC-32 trailer. The SHA-256 of the file is its content hash.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const DeskCnn& net);
DeskCnn deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& context);
// Returns the content hash of the written file.
std::string save_checkpoint(const DeskCnn& net, const std::filesystem::path& path);
DeskCnn load_checkpoint(const std::filesystem::path& path);

}  // namespace biqa
