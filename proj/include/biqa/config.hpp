// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "biqa/backbone.hpp"
#include "biqa/dataset.hpp"
#include "biqa/fusion.hpp"
#include "biqa/regressor.hpp"

namespace biqa {

enum class BackboneKind { kDesk, kPrecomputed };
enum class CropMode { kCentralCrop, kRandomCrops };
enum class FinetuneScope { kPerSplit, kGlobal };

struct PreprocessConfig {
  CropMode mode = CropMode::kRandomCrops;
  // Central-crop mode resizes the shorter side to this before cropping;
  // 0 picks round(input_size * 256 / 227).
  int central_resize = 0;

  int resize_target(int input_size) const;
  bool operator==(const PreprocessConfig&) const = default;
};

// Config file layout (INI; ';' or '#' comments):
//
//   [experiment]  manifest, protocol, seed, repeats, output, jobs, final_model
//   [backbone]    kind = desk | precomputed, features, checkpoint,
//                 input_size, feature_dim
//   [preprocess]  mode = random-crops | central-crop, central_resize
//   [fusion]      schemes = prediction_pool:avg, feature_concat, ...
//                 crops = 5, 10 | default
//   [svr]         C, epsilon, tol, max_passes, standardize, c_grid,
//                 clip_predictions
//   [finetune]    enabled, scope = per-split | global, iterations, batch_size,
//                 learning_rate, momentum, head_init_std, frozen_layers,
//                 crops_per_image
//   [selection]   alpha
//
// Relative paths resolve against the config file's directory.
struct ExperimentConfig {
  std::filesystem::path manifest;
  Protocol protocol = Protocol::kChallenge;
  std::uint64_t seed = 1;
  std::optional<int> repeats;
  std::filesystem::path output_dir = "biqa-out";
  int jobs = 1;
  bool final_model = true;

  BackboneKind backbone = BackboneKind::kDesk;
  std::filesystem::path features_path;
  std::filesystem::path checkpoint_path;  // empty: seeded initialisation
  DeskArchitecture arch;

  PreprocessConfig preprocess;
  std::vector<FusionConfig> fusions = {FusionConfig{FusionScheme::kPredictionPool, PoolOp::kAvg, 10}};

  SVRConfig svr;
  std::vector<double> c_grid = {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  bool clip_predictions = false;

  bool finetune = false;
  FinetuneScope finetune_scope = FinetuneScope::kPerSplit;
  TrainConfig train;
  int finetune_crops_per_image = 0;  // 0: the largest swept crop count

  double alpha = 0.05;

  // Throws UsageError when the settings contradict each other.
  void validate() const;

  int max_crops() const;
  int finetune_crops() const;
  int repeat_count() const;

  // Every setting, defaults included, as ordered (section.key, value) pairs.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

std::string_view to_string(BackboneKind k);
std::string_view to_string(CropMode m);
std::string_view to_string(FinetuneScope s);

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace biqa
