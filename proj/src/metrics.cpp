// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include "biqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "biqa/error.hpp"

namespace biqa {

void ScorePairs::validate() const {
  if (predicted.size() != truth.size()) {
    throw DataError("score pairs: " + std::to_string(predicted.size()) + " predictions vs " +
                    std::to_string(truth.size()) + " ground-truth values");
  }
  if (truth_std && truth_std->size() != truth.size()) {
    throw DataError("score pairs: standard deviations do not match the number of scores");
  }
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!std::isfinite(predicted[i]) || !std::isfinite(truth[i])) {
      throw DataError("score pairs: non-finite value at index " + std::to_string(i));
    }
  }
}

namespace {

void check_pair_input(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("correlation: series lengths differ");
  if (x.size() < 2) throw DataError("correlation needs at least two pairs");
}

}  // namespace

std::optional<double> pearson_lcc(std::span<const double> x, std::span<const double> y) {
  check_pair_input(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> pearson_lcc(const ScorePairs& pairs) {
  pairs.validate();
  return pearson_lcc(pairs.predicted, pairs.truth);
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share rank ((i + 1) + (j + 1)) / 2.
    const double r = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> spearman_srocc(std::span<const double> x, std::span<const double> y) {
  check_pair_input(x, y);
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  return pearson_lcc(rx, ry);
}

std::optional<double> spearman_srocc(const ScorePairs& pairs) {
  pairs.validate();
  return spearman_srocc(pairs.predicted, pairs.truth);
}

ErrorStats error_stats(const ScorePairs& pairs, const ScaleBounds& scale) {
  pairs.validate();
  if (pairs.truth.empty()) throw DataError("error statistics need at least one pair");
  if (!(scale.width() > 0.0) || !std::isfinite(scale.width())) {
    throw DataError("error statistics: degenerate score scale");
  }
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < pairs.truth.size(); ++i) {
    const double e = pairs.predicted[i] - pairs.truth[i];
    se += e * e;
    ae += std::abs(e);
  }
  const double n = static_cast<double>(pairs.truth.size());
  return {100.0 * std::sqrt(se / n) / scale.width(), 100.0 * (ae / n) / scale.width()};
}

SigmaCoverage sigma_coverage(const ScorePairs& pairs) {
  pairs.validate();
  if (!pairs.truth_std) throw DataError("sigma coverage needs per-image score standard deviations");
  SigmaCoverage out;
  std::array<int, 3> hits{};
  for (std::size_t i = 0; i < pairs.truth.size(); ++i) {
    const double sd = (*pairs.truth_std)[i];
    if (!(sd > 0.0)) {
      ++out.excluded;
      continue;
    }
    ++out.used;
    const double z = std::abs(pairs.predicted[i] - pairs.truth[i]) / sd;
    for (int k = 0; k < 3; ++k) {
      if (z <= k + 1) ++hits[k];
    }
  }
  if (out.used == 0) throw DataError("sigma coverage: no pair has a positive standard deviation");
  for (int k = 0; k < 3; ++k) out.fractions[k] = static_cast<double>(hits[k]) / out.used;
  return out;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw UsageError("t distribution needs positive degrees of freedom");
  if (std::isnan(t)) throw NumericError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  // P(|T| >= |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2)
  const double x = df / (df + t * t);
  return std::clamp(boost::math::ibeta(0.5 * df, 0.5, x), 0.0, 1.0);
}

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("t-test needs at least two values per sample");
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / na;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / nb;
  double ssa = 0.0, ssb = 0.0;
  for (double v : a) ssa += (v - ma) * (v - ma);
  for (double v : b) ssb += (v - mb) * (v - mb);
  TTestResult r;
  r.df = na + nb - 2.0;
  const double pooled = (ssa + ssb) / r.df;
  const double diff = ma - mb;
  if (pooled == 0.0) {
    if (diff == 0.0) return r;
    r.t = diff > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    r.degenerate = true;
    return r;
  }
  r.t = diff / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

double median(std::span<const double> values) {
  if (values.empty()) throw DataError("median of an empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

SplitMetrics evaluate_split(const ScorePairs& pairs, const ScaleBounds& scale) {
  SplitMetrics m;
  m.lcc = pearson_lcc(pairs);
  m.srocc = spearman_srocc(pairs);
  const ErrorStats e = error_stats(pairs, scale);
  m.rmse_pct = e.rmse_pct;
  m.mae_pct = e.mae_pct;
  if (pairs.truth_std) {
    const bool any = std::any_of(pairs.truth_std->begin(), pairs.truth_std->end(),
                                 [](double s) { return s > 0.0; });
    if (any) m.sigma_coverage = sigma_coverage(pairs).fractions;
  }
  return m;
}

namespace {

template <typename Get>
std::optional<double> optional_median(std::span<const SplitMetrics> splits, Get get) {
  std::vector<double> v;
  for (const auto& s : splits) {
    if (auto x = get(s)) v.push_back(*x);
  }
  if (v.empty()) return std::nullopt;
  return median(v);
}

}  // namespace

SplitMetrics median_over_splits(std::span<const SplitMetrics> per_split) {
  if (per_split.empty()) throw DataError("median over splits of an empty list");
  SplitMetrics m;
  m.lcc = optional_median(per_split, [](const SplitMetrics& s) { return s.lcc; });
  m.srocc = optional_median(per_split, [](const SplitMetrics& s) { return s.srocc; });
  std::vector<double> v;
  for (const auto& s : per_split) v.push_back(s.rmse_pct);
  m.rmse_pct = median(v);
  v.clear();
  for (const auto& s : per_split) v.push_back(s.mae_pct);
  m.mae_pct = median(v);
  std::array<double, 3> cov{};
  bool have = true;
  for (int k = 0; k < 3 && have; ++k) {
    auto mk = optional_median(per_split, [k](const SplitMetrics& s) -> std::optional<double> {
      if (!s.sigma_coverage) return std::nullopt;
      return (*s.sigma_coverage)[k];
    });
    if (!mk) have = false;
    else cov[k] = *mk;
  }
  if (have) m.sigma_coverage = cov;
  return m;
}

CropSelection select_crop_count(const std::map<int, std::vector<double>>& results, double alpha) {
  if (results.size() < 2) throw UsageError("crop-count selection needs at least two candidates");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("crop-count selection: alpha must be in (0, 1)");
  const std::size_t splits = results.begin()->second.size();
  CropSelection sel;
  for (const auto& [n, lccs] : results) {
    if (lccs.size() != splits) throw UsageError("crop-count selection: unequal split counts");
    for (double v : lccs) {
      if (!std::isfinite(v)) throw NumericError("crop-count selection: non-finite LCC for n=" + std::to_string(n));
    }
    sel.median_lcc[n] = median(lccs);
  }
  // std::map iterates in increasing n, so strict > keeps the smaller n on ties.
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [n, med] : sel.median_lcc) {
    if (med > best) {
      best = med;
      sel.n_best = n;
    }
  }
  const auto& best_lccs = results.at(sel.n_best);
  sel.n_star = sel.n_best;
  for (const auto& [n, lccs] : results) {
    const TTestResult t = two_sample_ttest(lccs, best_lccs);
    sel.versus_best[n] = t;
    if (n < sel.n_star && t.p >= alpha) sel.n_star = n;
  }
  return sel;
}

}  // namespace biqa
