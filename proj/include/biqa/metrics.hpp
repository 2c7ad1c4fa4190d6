// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "biqa/dataset.hpp"

namespace biqa {

struct ScorePairs {
  std::vector<double> predicted;
  std::vector<double> truth;
  std::optional<std::vector<double>> truth_std;

  // Throws DataError on unequal lengths or non-finite values.
  void validate() const;
};

// Sample Pearson r. No value when either series is constant. Throws
// DataError for fewer than two pairs.
std::optional<double> pearson_lcc(std::span<const double> x, std::span<const double> y);
std::optional<double> pearson_lcc(const ScorePairs& pairs);

// Ranks starting at 1; tied values share the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

std::optional<double> spearman_srocc(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman_srocc(const ScorePairs& pairs);

struct ErrorStats {
  double rmse_pct = 0.0;
  double mae_pct = 0.0;
};

// RMSE and MAE of predicted - truth as a percentage of the scale width.
ErrorStats error_stats(const ScorePairs& pairs, const ScaleBounds& scale);

struct SigmaCoverage {
  // Fraction of usable pairs with |pred - truth| / std <= k, k = 1, 2, 3.
  std::array<double, 3> fractions{};
  int used = 0;
  int excluded = 0;  // pairs with zero std
};

SigmaCoverage sigma_coverage(const ScorePairs& pairs);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  // Zero pooled variance with different means: t is +-inf and p is 0.
  bool degenerate = false;
};

// Pooled-variance Student t-test, two-sided, df = |a| + |b| - 2.
TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b);

// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees.
double student_t_two_sided_p(double t, double df);

// Mean of the two central values for even counts. Throws on empty input.
double median(std::span<const double> values);

struct SplitMetrics {
  std::optional<double> lcc;
  std::optional<double> srocc;
  double rmse_pct = 0.0;
  double mae_pct = 0.0;
  std::optional<std::array<double, 3>> sigma_coverage;

  bool operator==(const SplitMetrics&) const = default;
};

SplitMetrics evaluate_split(const ScorePairs& pairs, const ScaleBounds& scale);

// Fieldwise median. Optional fields take the median of the splits that carry
// a value and stay empty when none does.
SplitMetrics median_over_splits(std::span<const SplitMetrics> per_split);

struct CropSelection {
  int n_star = 0;
  int n_best = 0;
  std::map<int, double> median_lcc;
  // Each candidate tested against n_best.
  std::map<int, TTestResult> versus_best;
};

// n_best maximises the median LCC (ties to the smaller n); n* is the smallest
// n whose LCCs are not significantly different from n_best's at `alpha`.
CropSelection select_crop_count(const std::map<int, std::vector<double>>& results, double alpha = 0.05);

}  // namespace biqa
