// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include <gtest/gtest.h>

#include "biqa/error.hpp"
#include "biqa/fusion.hpp"
#include "biqa/pipeline.hpp"
#include "biqa/regressor.hpp"
#include "biqa/rng.hpp"

namespace biqa {
namespace {

std::vector<FeatureVector> random_vectors(int n, int d, Rng& rng) {
  std::vector<FeatureVector> out(n, FeatureVector(d));
  for (auto& v : out)
    for (auto& x : v) x = 10 * rng.uniform() - 5;
  return out;
}

TEST(PoolFeatures, Examples) {
  const std::vector<FeatureVector> v = {{1, 2, 3}, {3, 4, 5}};
  EXPECT_EQ(pool_features(v, PoolOp::kAvg), (FeatureVector{2, 3, 4}));
  EXPECT_EQ(pool_features(v, PoolOp::kMin), (FeatureVector{1, 2, 3}));
  EXPECT_EQ(pool_features(v, PoolOp::kMax), (FeatureVector{3, 4, 5}));
  const std::vector<FeatureVector> one = {{0.1, -7, 3e9}};
  for (auto op : {PoolOp::kMin, PoolOp::kAvg, PoolOp::kMax}) EXPECT_EQ(pool_features(one, op), one[0]);
}

TEST(PoolFeatures, MinMaxAgainstExhaustiveScan) {
  Rng rng(1);
  const auto v = random_vectors(7, 9, rng);
  const FeatureVector lo = pool_features(v, PoolOp::kMin), hi = pool_features(v, PoolOp::kMax);
  for (int j = 0; j < 9; ++j) {
    double a = v[0][j], b = v[0][j];
    for (const auto& x : v) {
      a = std::min(a, x[j]);
      b = std::max(b, x[j]);
      EXPECT_LE(lo[j], x[j]);
      EXPECT_GE(hi[j], x[j]);
    }
    EXPECT_EQ(lo[j], a);
    EXPECT_EQ(hi[j], b);
  }
}

TEST(PoolFeatures, CopiesAverageToThemselves) {
  Rng rng(2);
  for (int n = 1; n <= 50; ++n) {
    const FeatureVector v = random_vectors(1, 6, rng)[0];
    EXPECT_EQ(pool_features(std::vector<FeatureVector>(n, v), PoolOp::kAvg), v);
  }
}

TEST(PoolFeatures, PermutationInvariantBitwise) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto v = random_vectors(2 + static_cast<int>(rng.below(8)), 5, rng);
    const FeatureVector ref = pool_features(v, PoolOp::kAvg);
    rng.shuffle(v);
    EXPECT_EQ(pool_features(v, PoolOp::kAvg), ref);
  }
}

TEST(PoolFeatures, Errors) {
  EXPECT_THROW(pool_features({}, PoolOp::kAvg), UsageError);
  const std::vector<FeatureVector> ragged = {{1, 2}, {1}};
  EXPECT_THROW(pool_features(ragged, PoolOp::kMax), DataError);
  EXPECT_THROW(concat_features(ragged), DataError);
  EXPECT_THROW(concat_features({}), UsageError);
}

TEST(ConcatFeatures, ExamplesAndRoundTrip) {
  const std::vector<FeatureVector> v = {{1, 2, 3}, {4, 5, 6}};
  const FeatureVector j = concat_features(v);
  EXPECT_EQ(j, (FeatureVector{1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(split_concatenated(j, 3), v);
  EXPECT_EQ(concat_features(std::vector<FeatureVector>{{9, 8}}), (FeatureVector{9, 8}));
  EXPECT_THROW(split_concatenated(j, 4), DataError);
}

TEST(ConcatFeatures, OrderDefined) {
  const std::vector<FeatureVector> ab = {{1, 2}, {3, 4}}, ba = {{3, 4}, {1, 2}};
  EXPECT_NE(concat_features(ab), concat_features(ba));
  EXPECT_EQ(split_concatenated(concat_features(ba), 2), ba);
}

TEST(PoolPredictions, Examples) {
  EXPECT_EQ(pool_predictions(std::vector<double>{40, 60}, PoolOp::kAvg), 50.0);
  EXPECT_EQ(pool_predictions(std::vector<double>{40, 60}, PoolOp::kMin), 40.0);
  EXPECT_EQ(pool_predictions(std::vector<double>{40, 60}, PoolOp::kMax), 60.0);
  EXPECT_EQ(pool_predictions(std::vector<double>{33.3}, PoolOp::kAvg), 33.3);
  std::vector<double> s = {0.1, 0.7, 0.3, 1e-9, 12};
  const double ref = pool_predictions(s, PoolOp::kAvg);
  std::reverse(s.begin(), s.end());
  EXPECT_EQ(pool_predictions(s, PoolOp::kAvg), ref);
  EXPECT_THROW(pool_predictions({}, PoolOp::kAvg), UsageError);
}

TEST(FusionConfig, LabelsRoundTrip) {
  for (const char* label : {"prediction_pool:avg@10", "feature_pool:min@5", "feature_concat@35", "feature_pool:max@1"}) {
    EXPECT_EQ(FusionConfig::parse(label).label(), label);
  }
  EXPECT_THROW(FusionConfig::parse("feature_concat:avg@3"), UsageError);
  EXPECT_THROW(FusionConfig::parse("feature_pool@3"), UsageError);
  EXPECT_THROW(FusionConfig::parse("prediction_pool:median@3"), UsageError);
  EXPECT_THROW(FusionConfig::parse("prediction_pool:avg@0"), UsageError);
  EXPECT_EQ(default_crop_grid().front(), 5);
  EXPECT_EQ(default_crop_grid().back(), 50);
  EXPECT_EQ(default_crop_grid().size(), 10u);
}

TEST(SchemeEquivalence, AllSchemesAgreeAtOneCrop) {
  Rng rng(4);
  std::vector<std::vector<FeatureVector>> crops;
  std::vector<double> mos;
  for (int i = 0; i < 25; ++i) {
    crops.push_back(random_vectors(1, 3, rng));
    mos.push_back(50 + 10 * crops.back()[0][0] - 3 * crops.back()[0][2] + rng.normal());
  }
  SVRConfig cfg;
  cfg.C = 2.0;
  std::vector<double> ref;
  for (const char* label : {"feature_pool:min@1", "feature_pool:avg@1", "feature_pool:max@1", "feature_concat@1",
                            "prediction_pool:min@1", "prediction_pool:avg@1", "prediction_pool:max@1"}) {
    const FusionConfig f = FusionConfig::parse(label);
    std::vector<FeatureVector> rows;
    std::vector<double> targets;
    for (int i = 0; i < 25; ++i) append_training_rows(f, crops[i], mos[i], rows, targets);
    const LinearSVRModel m = train_svr(rows, targets, cfg);
    std::vector<double> scores;
    for (int i = 0; i < 25; ++i) scores.push_back(score_image(f, m, crops[i]));
    if (ref.empty()) ref = scores;
    EXPECT_EQ(scores, ref) << label;
  }
}

TEST(TrainingRows, PredictionPoolingRepeatsTheImageScore) {
  Rng rng(5);
  const auto crops = random_vectors(4, 2, rng);
  std::vector<FeatureVector> rows;
  std::vector<double> targets;
  append_training_rows(FusionConfig::parse("prediction_pool:avg@3"), crops, 42.0, rows, targets);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(targets, (std::vector<double>{42, 42, 42}));
  EXPECT_EQ(rows[2], crops[2]);
  rows.clear();
  targets.clear();
  append_training_rows(FusionConfig::parse("feature_concat@2"), crops, 7.0, rows, targets);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0], concat_features(std::span<const FeatureVector>(crops.data(), 2)));
}

}  // namespace
}  // namespace biqa
