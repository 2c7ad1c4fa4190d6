// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biqa/backbone.hpp"
#include "biqa/config.hpp"
#include "biqa/dataset.hpp"
#include "biqa/quality_model.hpp"
#include "biqa/regressor.hpp"
#include "biqa/report.hpp"

namespace biqa {

using FeatureTable = std::map<CropKey, FeatureVector>;

// Fused score of one image from its per-crop features (sampling order).
// Uses the first fusion.n_crops vectors. `crop_scores` receives per-crop
// predictions under prediction pooling.
double score_image(const FusionConfig& fusion, const LinearSVRModel& svr,
                   std::span<const FeatureVector> crop_features, std::vector<double>* crop_scores = nullptr);

// Regression rows contributed by one image: one fused row, or one row per
// crop (each carrying the image score) under prediction pooling.
void append_training_rows(const FusionConfig& fusion, std::span<const FeatureVector> crop_features,
                          double target, std::vector<FeatureVector>& rows, std::vector<double>& targets);

// Runs fn(0..n-1) on up to `jobs` threads. The first exception (lowest
// index) is rethrown after all workers finish.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

// Inputs shared by every split of an experiment.
struct ExperimentContext {
  ExperimentConfig config;
  DatasetManifest manifest;
  SplitPlan plan;
  // Raw crops per image id in sampling order (desk backbone only).
  std::map<std::string, std::vector<Crop>> crops;
  std::shared_ptr<const PrecomputedFeatures> precomputed;
  std::optional<DeskCnn> base_net;
  std::string base_tag;

  int crops_per_image() const;
  std::shared_ptr<const FeatureExtractor> base_extractor() const;
};

ExperimentContext prepare_experiment(const ExperimentConfig& config);

// Fine-tunes the base network on the crops of `ids`.
TrainResult finetune_on(const ExperimentContext& ctx, std::span<const std::string> ids, std::uint64_t seed);
std::uint64_t finetune_seed(const ExperimentConfig& config, std::optional<int> repeat);

// Features of crops 0..crops_per_image()-1 of every image in `ids`.
FeatureTable extract_table(const ExperimentContext& ctx, const FeatureExtractor& extractor,
                           std::span<const std::string> ids);

// Per-image crop features in sampling order, n_crops of them.
std::vector<FeatureVector> image_features(const FeatureTable& table, const std::string& id, int n_crops);

struct SplitModels {
  std::map<std::string, LinearSVRModel> models;  // keyed by fusion label
  std::map<std::string, double> selected_c;      // legacy protocol only

  bool operator==(const SplitModels&) const = default;
};

SplitModels fit_split(const ExperimentContext& ctx, int repeat, const FeatureTable& table);

// One SplitResult per fusion configuration, in configuration order.
std::vector<SplitResult> evaluate_fold(const ExperimentContext& ctx, int repeat, const FeatureTable& table,
                                       const SplitModels& models);

EvalReport assemble_report(const ExperimentContext& ctx, const std::vector<std::vector<SplitResult>>& per_split);

struct RunArtifacts {
  std::vector<std::vector<double>> loss_curves;  // per split, when fine-tuning
  std::optional<QualityModel> final_model;
  std::optional<DeskCnn> final_net;
};

// The whole experiment in memory. `artifacts` receives loss curves and the
// model retrained on all images with the winning fusion configuration.
EvalReport run_experiment(const ExperimentConfig& config, RunArtifacts* artifacts = nullptr);
EvalReport run_experiment(const ExperimentContext& ctx, RunArtifacts* artifacts = nullptr);

// Writes report files, loss curves and (if present) the final model with its
// backbone checkpoint into `dir`.
void write_run_outputs(const EvalReport& report, const RunArtifacts& artifacts,
                       const ExperimentConfig& config, const std::filesystem::path& dir);

// Staged execution. Each stage reads what the previous one left in `dir`:
//   finetune  split_NN/backbone.ckpt + loss.csv (or backbone_global.ckpt)
//   extract   split_NN/features.biqf
//   train-svr split_NN/svr.json
//   evaluate  report.json, report.txt, scatter.csv
// Running all four yields the same report as run_experiment.
void finetune_stage(const ExperimentContext& ctx, const std::filesystem::path& dir);
void extract_stage(const ExperimentContext& ctx, const std::filesystem::path& dir);
void train_svr_stage(const ExperimentContext& ctx, const std::filesystem::path& dir);
EvalReport evaluate_stage(const ExperimentContext& ctx, const std::filesystem::path& dir);

std::filesystem::path split_dir(const std::filesystem::path& dir, int repeat);
void write_loss_curve(const std::filesystem::path& path, std::span<const double> curve);

// SVR models of one split as JSON (doubles round-trip exactly).
std::string split_models_to_json(const SplitModels& models);
SplitModels split_models_from_json(std::string_view json);

}  // namespace biqa
