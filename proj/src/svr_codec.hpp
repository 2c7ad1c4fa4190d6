// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

// JSON form of LinearSVRModel shared by the model file and stage outputs.

#pragma once

#include <json.hpp>

#include "biqa/error.hpp"
#include "biqa/regressor.hpp"

namespace biqa::detail {

using Json = nlohmann::ordered_json;

inline Json svr_to_json(const LinearSVRModel& m) {
  Json j;
  j["w"] = m.w;
  j["b"] = m.b;
  j["feature_dim"] = m.feature_dim;
  j["sample_count"] = m.sample_count;
  j["feature_mean"] = m.feature_mean;
  j["feature_scale"] = m.feature_scale;
  j["config"] = {{"C", m.config.C},
                 {"epsilon", m.config.epsilon},
                 {"tol", m.config.tol},
                 {"max_passes", m.config.max_passes},
                 {"standardize", m.config.standardize},
                 {"seed", m.config.seed}};
  return j;
}

inline LinearSVRModel svr_from_json(const Json& j) {
  LinearSVRModel m;
  try {
    m.w = j.at("w").get<std::vector<double>>();
    m.b = j.at("b").get<double>();
    m.feature_dim = j.at("feature_dim").get<int>();
    m.sample_count = j.at("sample_count").get<int>();
    m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    m.feature_scale = j.at("feature_scale").get<std::vector<double>>();
    const auto& c = j.at("config");
    m.config.C = c.at("C").get<double>();
    m.config.epsilon = c.at("epsilon").get<double>();
    m.config.tol = c.at("tol").get<double>();
    m.config.max_passes = c.at("max_passes").get<int>();
    m.config.standardize = c.at("standardize").get<bool>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed regressor parameters: ") + e.what());
  }
  if (static_cast<int>(m.w.size()) != m.feature_dim ||
      (!m.feature_mean.empty() && static_cast<int>(m.feature_mean.size()) != m.feature_dim) ||
      m.feature_mean.size() != m.feature_scale.size()) {
    throw DataError("regressor parameters have inconsistent dimensions");
  }
  return m;
}

}  // namespace biqa::detail
