// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "biqa/backbone.hpp"

namespace biqa {

struct SVRConfig {
  double C = 1.0;
  double epsilon = 0.1;
  // Stop once a full pass lowers the dual objective by less than
  // tol * max(1, |objective|).
  double tol = 1e-7;
  int max_passes = 1000;
  // Per-dimension z-scoring fitted on the training rows.
  bool standardize = false;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const SVRConfig&) const = default;
};

// Linear epsilon-insensitive regressor, score = w . z(x) + b where z is the
// identity unless standardisation was enabled.
struct LinearSVRModel {
  std::vector<double> w;
  double b = 0.0;
  SVRConfig config;
  int feature_dim = 0;
  int sample_count = 0;
  std::vector<double> feature_mean;   // empty unless standardised
  std::vector<double> feature_scale;  // empty unless standardised

  bool operator==(const LinearSVRModel&) const = default;
};

struct SolverLog {
  // Dual objective 1/2 b'Qb - y'b + eps |b|_1 after each pass (minimised;
  // its negation lower-bounds the primal optimum).
  std::vector<double> dual_objective;
  // Primal objective of (w, best b for w) after each pass.
  std::vector<double> primal_objective;
  int passes = 0;
  bool converged = false;
};

// Minimises J(w, b) = 1/2 |w|^2 + C sum_i max(0, |w.x_i + b - y_i| - eps)
// (b unregularised) by pairwise exact coordinate descent on the dual, sweeping
// the samples in a seeded permutation each pass. The bias is then set to the
// exact minimiser of J for the final w.
LinearSVRModel train_svr(std::span<const FeatureVector> X, std::span<const double> y,
                         const SVRConfig& cfg, SolverLog* log = nullptr);

double predict(const LinearSVRModel& model, const FeatureVector& x);
std::vector<double> predict(const LinearSVRModel& model, std::span<const FeatureVector> X);

// J evaluated with the model's parameters and cfg's C and epsilon (in the
// standardised space when the model carries a standardiser).
double objective(const LinearSVRModel& model, std::span<const FeatureVector> X,
                 std::span<const double> y, const SVRConfig& cfg);

// argmin_b sum_i max(0, |r_i - b| - eps): midpoint of the optimal interval.
double optimal_bias(std::span<const double> residuals, double epsilon);

}  // namespace biqa
