// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "biqa/backbone.hpp"
#include "biqa/config.hpp"
#include "biqa/fusion.hpp"
#include "biqa/imageops.hpp"
#include "biqa/regressor.hpp"

namespace biqa {

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct BackboneRef {
  BackboneKind kind = BackboneKind::kDesk;
  // Desk: SHA-256 of the checkpoint file. Precomputed: the feature source tag.
  std::string source_tag;
  // Checkpoint or feature file, relative to the model file's directory
  // unless absolute.
  std::filesystem::path location;
  int input_size = 0;

  bool operator==(const BackboneRef&) const = default;
};

struct QualityModel {
  std::uint32_t format_version = kModelFormatVersion;
  BackboneRef backbone;
  PreprocessConfig preprocess;
  FusionConfig fusion;
  LinearSVRModel svr;
  ScaleBounds scale;
  bool clip_predictions = false;

  bool operator==(const QualityModel&) const = default;
};

// File: "BIQM", u32 version, u64 payload size, CBOR payload, CRC-32 of all
// preceding bytes.
std::vector<std::uint8_t> serialize_model(const QualityModel& model);
QualityModel deserialize_model(const std::vector<std::uint8_t>& bytes, const std::string& context);
void save_model(const QualityModel& model, const std::filesystem::path& path);
QualityModel load_model(const std::filesystem::path& path);

struct ResolveOptions {
  // Accept a checkpoint whose hash differs from the recorded one, with a
  // warning instead of an error.
  bool allow_hash_mismatch = false;
};

struct ResolvedModel {
  QualityModel model;
  std::shared_ptr<const FeatureExtractor> extractor;
  std::vector<std::string> warnings;
};

// Loads the referenced backbone. Throws DataError when it is absent,
// unreadable, of the wrong shape or (by default) has a different hash.
ResolvedModel resolve_model(const QualityModel& model, const std::filesystem::path& model_dir,
                            const ResolveOptions& options = {});
ResolvedModel open_model(const std::filesystem::path& path, const ResolveOptions& options = {});

struct ImagePrediction {
  double score = 0.0;
  // Per-crop scores for prediction pooling, empty otherwise.
  std::vector<double> crop_scores;
  std::vector<std::array<int, 2>> crop_origins;
  bool with_replacement = false;
};

// n_crops defaults to the model's fusion crop count; central-crop models
// always use one crop. Precomputed backbones look features up under the
// image's file stem. Throws DataError for images smaller than the crop.
ImagePrediction predict_image(const ResolvedModel& model, const std::filesystem::path& image,
                              std::optional<int> n_crops, std::uint64_t seed);
ImagePrediction predict_raster(const ResolvedModel& model, const RasterImage& image,
                               const std::string& image_id, std::optional<int> n_crops,
                               std::uint64_t seed);

}  // namespace biqa
