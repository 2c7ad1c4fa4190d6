// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "biqa/backbone.hpp"

namespace biqa {

enum class PoolOp { kMin, kAvg, kMax };

enum class FusionScheme { kFeaturePool, kFeatureConcat, kPredictionPool };

std::string_view to_string(PoolOp op);
std::string_view to_string(FusionScheme scheme);
PoolOp parse_pool_op(std::string_view text);
FusionScheme parse_fusion_scheme(std::string_view text);

struct FusionConfig {
  FusionScheme scheme = FusionScheme::kPredictionPool;
  std::optional<PoolOp> op = PoolOp::kAvg;  // absent for concatenation
  int n_crops = 1;

  // Throws UsageError unless n_crops >= 1 and `op` is present iff the scheme pools.
  void validate() const;
  // "prediction_pool:avg@10", "feature_concat@35"
  std::string label() const;
  static FusionConfig parse(std::string_view label);

  auto operator<=>(const FusionConfig&) const = default;
};

// Crop-count grid 5, 10, ..., 50.
std::vector<int> default_crop_grid();

FeatureVector pool_features(std::span<const FeatureVector> vectors, PoolOp op);
FeatureVector concat_features(std::span<const FeatureVector> vectors);
// Inverse of concat_features for segments of length `dim`.
std::vector<FeatureVector> split_concatenated(const FeatureVector& joined, int dim);
double pool_predictions(std::span<const double> scores, PoolOp op);

}  // namespace biqa
