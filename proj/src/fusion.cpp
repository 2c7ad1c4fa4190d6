// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include "biqa/fusion.hpp"

#include <algorithm>

#include "biqa/error.hpp"
#include "biqa/text.hpp"

namespace biqa {

std::string_view to_string(PoolOp op) {
  switch (op) {
    case PoolOp::kMin: return "min";
    case PoolOp::kAvg: return "avg";
    case PoolOp::kMax: return "max";
  }
  return "?";
}

std::string_view to_string(FusionScheme scheme) {
  switch (scheme) {
    case FusionScheme::kFeaturePool: return "feature_pool";
    case FusionScheme::kFeatureConcat: return "feature_concat";
    case FusionScheme::kPredictionPool: return "prediction_pool";
  }
  return "?";
}

PoolOp parse_pool_op(std::string_view text) {
  if (text == "min") return PoolOp::kMin;
  if (text == "avg") return PoolOp::kAvg;
  if (text == "max") return PoolOp::kMax;
  throw UsageError("unknown pooling operator '" + std::string(text) + "' (min|avg|max)");
}

FusionScheme parse_fusion_scheme(std::string_view text) {
  if (text == "feature_pool") return FusionScheme::kFeaturePool;
  if (text == "feature_concat") return FusionScheme::kFeatureConcat;
  if (text == "prediction_pool") return FusionScheme::kPredictionPool;
  throw UsageError("unknown fusion scheme '" + std::string(text) + "'");
}

void FusionConfig::validate() const {
  if (n_crops < 1) throw UsageError("fusion n_crops must be >= 1");
  const bool pools = scheme != FusionScheme::kFeatureConcat;
  if (pools != op.has_value()) {
    throw UsageError(std::string(to_string(scheme)) +
                     (pools ? " requires a pooling operator" : " takes no pooling operator"));
  }
}

std::string FusionConfig::label() const {
  std::string s(to_string(scheme));
  if (op) s += ":" + std::string(to_string(*op));
  return s + "@" + std::to_string(n_crops);
}

FusionConfig FusionConfig::parse(std::string_view label) {
  FusionConfig cfg;
  std::string_view head = label;
  cfg.n_crops = 1;
  if (const auto at = label.find('@'); at != std::string_view::npos) {
    cfg.n_crops = static_cast<int>(parse_int(label.substr(at + 1), "fusion crop count"));
    head = label.substr(0, at);
  }
  if (const auto colon = head.find(':'); colon != std::string_view::npos) {
    cfg.scheme = parse_fusion_scheme(head.substr(0, colon));
    cfg.op = parse_pool_op(head.substr(colon + 1));
  } else {
    cfg.scheme = parse_fusion_scheme(head);
    cfg.op = std::nullopt;
  }
  cfg.validate();
  return cfg;
}

std::vector<int> default_crop_grid() { return {5, 10, 15, 20, 25, 30, 35, 40, 45, 50}; }

namespace {

std::size_t common_length(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) throw UsageError("fusion of an empty crop list");
  const std::size_t d = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != d) throw DataError("ragged feature vectors in fusion");
  }
  return d;
}

// Mean of sorted values with an incremental update: independent of input
// order, and exact for repeated copies of one value.
double order_free_mean(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double mean = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    mean += (values[k] - mean) / static_cast<double>(k + 1);
  }
  return mean;
}

}  // namespace

FeatureVector pool_features(std::span<const FeatureVector> vectors, PoolOp op) {
  const std::size_t d = common_length(vectors);
  FeatureVector out = vectors.front();
  if (op == PoolOp::kAvg) {
    std::vector<double> column(vectors.size());
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < vectors.size(); ++i) column[i] = vectors[i][j];
      out[j] = order_free_mean(column);
    }
    return out;
  }
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out[j] = op == PoolOp::kMin ? std::min(out[j], vectors[i][j]) : std::max(out[j], vectors[i][j]);
    }
  }
  return out;
}

FeatureVector concat_features(std::span<const FeatureVector> vectors) {
  const std::size_t d = common_length(vectors);
  FeatureVector out;
  out.reserve(d * vectors.size());
  for (const auto& v : vectors) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::vector<FeatureVector> split_concatenated(const FeatureVector& joined, int dim) {
  if (dim < 1 || joined.size() % static_cast<std::size_t>(dim) != 0) {
    throw DataError("concatenated vector length is not a multiple of the segment length");
  }
  std::vector<FeatureVector> out;
  for (std::size_t i = 0; i < joined.size(); i += static_cast<std::size_t>(dim)) {
    out.emplace_back(joined.begin() + static_cast<std::ptrdiff_t>(i),
                     joined.begin() + static_cast<std::ptrdiff_t>(i + static_cast<std::size_t>(dim)));
  }
  return out;
}

double pool_predictions(std::span<const double> scores, PoolOp op) {
  if (scores.empty()) throw UsageError("prediction pooling of an empty score list");
  switch (op) {
    case PoolOp::kMin: return *std::min_element(scores.begin(), scores.end());
    case PoolOp::kMax: return *std::max_element(scores.begin(), scores.end());
    case PoolOp::kAvg: break;
  }
  std::vector<double> values(scores.begin(), scores.end());
  return order_free_mean(values);
}

}  // namespace biqa
