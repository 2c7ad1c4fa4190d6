// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include "biqa/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "biqa/error.hpp"
#include "biqa/rng.hpp"

namespace biqa {

void SVRConfig::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw UsageError("SVR C must be > 0");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw UsageError("SVR epsilon must be >= 0");
  if (!(tol > 0.0)) throw UsageError("SVR tol must be > 0");
  if (max_passes < 1) throw UsageError("SVR max_passes must be >= 1");
}

namespace {

// Gram matrices above this many entries are recomputed row by row.
constexpr std::size_t kGramCacheLimit = std::size_t{1} << 24;

struct Dense {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  const double* row(int i) const { return v.data() + static_cast<std::size_t>(i) * cols; }
};

double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

struct PairStep {
  double t = 0.0;
  double delta = 0.0;
};

// Exact minimiser over t of
//   t g + eta t^2 / 2 + eps (|bi + t| - |bi| + |bj - t| - |bj|)
// subject to |bi + t| <= C and |bj - t| <= C.
PairStep pair_step(double bi, double bj, double g, double eta, double eps, double C) {
  const double lo = std::max(-C - bi, bj - C);
  const double hi = std::min(C - bi, bj + C);
  if (!(hi > lo)) return {};
  auto delta = [&](double t) {
    return t * g + 0.5 * eta * t * t +
           eps * (std::abs(bi + t) - std::abs(bi) + std::abs(bj - t) - std::abs(bj));
  };
  double pts[4] = {lo, hi, 0.0, 0.0};
  int n = 2;
  if (-bi > lo && -bi < hi) pts[n++] = -bi;
  if (bj > lo && bj < hi) pts[n++] = bj;
  std::sort(pts, pts + n);

  PairStep best;
  auto consider = [&](double t) {
    const double d = delta(t);
    if (d < best.delta) best = {t, d};
  };
  for (int k = 0; k < n; ++k) consider(pts[k]);
  if (eta > 0.0) {
    for (int k = 0; k + 1 < n; ++k) {
      const double mid = 0.5 * (pts[k] + pts[k + 1]);
      const double si = bi + mid > 0.0 ? 1.0 : -1.0;
      const double sj = bj - mid > 0.0 ? 1.0 : -1.0;
      const double t = std::clamp(-(g + eps * (si - sj)) / eta, pts[k], pts[k + 1]);
      consider(t);
    }
  }
  return best;
}

double primal_objective(const Dense& Z, std::span<const double> y, const std::vector<double>& w,
                        double b, double C, double eps) {
  double loss = 0.0;
  for (int i = 0; i < Z.rows; ++i) {
    const double r = dot(w.data(), Z.row(i), Z.cols) + b - y[i];
    loss += std::max(0.0, std::abs(r) - eps);
  }
  return 0.5 * dot(w.data(), w.data(), Z.cols) + C * loss;
}

double bias_for(const Dense& Z, std::span<const double> y, const std::vector<double>& w, double eps) {
  std::vector<double> r(static_cast<std::size_t>(Z.rows));
  for (int i = 0; i < Z.rows; ++i) r[i] = y[i] - dot(w.data(), Z.row(i), Z.cols);
  return optimal_bias(r, eps);
}

Dense to_dense(std::span<const FeatureVector> X, const LinearSVRModel& m) {
  Dense Z{static_cast<int>(X.size()), m.feature_dim, {}};
  Z.v.resize(static_cast<std::size_t>(Z.rows) * Z.cols);
  for (int i = 0; i < Z.rows; ++i) {
    if (static_cast<int>(X[i].size()) != m.feature_dim) {
      throw DataError("feature vector of length " + std::to_string(X[i].size()) +
                      " does not match model dimension " + std::to_string(m.feature_dim));
    }
    for (int k = 0; k < Z.cols; ++k) {
      double v = X[i][k];
      if (!m.feature_mean.empty()) v = (v - m.feature_mean[k]) / m.feature_scale[k];
      Z.v[static_cast<std::size_t>(i) * Z.cols + k] = v;
    }
  }
  return Z;
}

}  // namespace

double optimal_bias(std::span<const double> residuals, double epsilon) {
  if (residuals.empty()) return 0.0;
  // The objective is convex piecewise linear with slope -N + (number of
  // breakpoints r_i +- eps passed); it is flat between the N-th and (N+1)-th.
  std::vector<double> pts;
  pts.reserve(2 * residuals.size());
  for (double r : residuals) {
    pts.push_back(r - epsilon);
    pts.push_back(r + epsilon);
  }
  std::sort(pts.begin(), pts.end());
  const std::size_t n = residuals.size();
  return 0.5 * (pts[n - 1] + pts[n]);
}

LinearSVRModel train_svr(std::span<const FeatureVector> X, std::span<const double> y,
                         const SVRConfig& cfg, SolverLog* log) {
  cfg.validate();
  if (X.empty()) throw DataError("SVR training needs at least one sample");
  if (X.size() != y.size()) throw DataError("SVR training: feature and target counts differ");
  const int n = static_cast<int>(X.size());
  const int d = static_cast<int>(X.front().size());
  if (d == 0) throw DataError("SVR training: zero-dimensional features");
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(X[i].size()) != d) throw DataError("SVR training: ragged feature vectors");
    if (!std::isfinite(y[i])) throw NumericError("SVR training: non-finite target");
    for (double v : X[i]) {
      if (!std::isfinite(v)) throw NumericError("SVR training: non-finite feature value");
    }
  }

  LinearSVRModel model;
  model.config = cfg;
  model.feature_dim = d;
  model.sample_count = n;
  if (cfg.standardize) {
    model.feature_mean.assign(d, 0.0);
    model.feature_scale.assign(d, 1.0);
    for (int k = 0; k < d; ++k) {
      double mean = 0.0;
      for (int i = 0; i < n; ++i) mean += X[i][k];
      mean /= n;
      double var = 0.0;
      for (int i = 0; i < n; ++i) var += (X[i][k] - mean) * (X[i][k] - mean);
      const double sd = std::sqrt(var / n);
      model.feature_mean[k] = mean;
      model.feature_scale[k] = sd > 0.0 ? sd : 1.0;
    }
  }
  const Dense Z = to_dense(X, model);
  const double C = cfg.C, eps = cfg.epsilon;

  const bool cache_gram = static_cast<std::size_t>(n) * n <= kGramCacheLimit;
  std::vector<double> gram;
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = dot(Z.row(i), Z.row(i), d);
  if (cache_gram) {
    gram.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        const double q = dot(Z.row(i), Z.row(j), d);
        gram[static_cast<std::size_t>(i) * n + j] = q;
        gram[static_cast<std::size_t>(j) * n + i] = q;
      }
    }
  }
  std::vector<double> row_i(n), row_j(n);
  auto load_row = [&](int i, std::vector<double>& out) {
    if (cache_gram) {
      std::copy_n(gram.begin() + static_cast<std::ptrdiff_t>(i) * n, n, out.begin());
    } else {
      for (int j = 0; j < n; ++j) out[j] = dot(Z.row(i), Z.row(j), d);
    }
  };

  std::vector<double> beta(n, 0.0), grad(n), w(d, 0.0);
  auto refresh = [&]() {
    std::fill(w.begin(), w.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      if (beta[i] == 0.0) continue;
      const double* z = Z.row(i);
      for (int k = 0; k < d; ++k) w[k] += beta[i] * z[k];
    }
    double f = 0.0;
    for (int i = 0; i < n; ++i) {
      grad[i] = dot(w.data(), Z.row(i), d) - y[i];
      f += 0.5 * beta[i] * (grad[i] - y[i]) + eps * std::abs(beta[i]);
    }
    return f;
  };

  // Directional derivatives of the dual along +e_k and -e_k.
  auto up = [&](int k) { return grad[k] + (beta[k] >= 0.0 ? eps : -eps); };
  auto down = [&](int k) { return -grad[k] + (beta[k] <= 0.0 ? eps : -eps); };

  Rng rng(derive_seed(cfg.seed, "svr-order"));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  SolverLog local;
  SolverLog& out_log = log ? *log : local;
  out_log = SolverLog{};
  double f = refresh();
  for (int pass = 0; pass < cfg.max_passes; ++pass) {
    rng.shuffle(order);
    const double accept = -1e-15 * std::max(1.0, std::abs(f));
    int moves = 0;
    for (int i : order) {
      load_row(i, row_i);
      const bool i_up = beta[i] < C, i_down = beta[i] > -C;
      const double ui = up(i), di = down(i);
      int best_j = -1;
      double best_score = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        double slope = 0.0;
        if (i_up && beta[j] > -C) slope = std::min(slope, ui + down(j));
        if (i_down && beta[j] < C) slope = std::min(slope, di + up(j));
        if (slope >= 0.0) continue;
        const double eta = std::max(diag[i] + diag[j] - 2.0 * row_i[j], 1e-12);
        const double score = slope * slope / eta;
        if (score > best_score) {
          best_score = score;
          best_j = j;
        }
      }
      if (best_j < 0) continue;
      const int j = best_j;
      const double eta = std::max(diag[i] + diag[j] - 2.0 * row_i[j], 0.0);
      const PairStep step = pair_step(beta[i], beta[j], grad[i] - grad[j], eta, eps, C);
      if (!(step.delta < accept) || step.t == 0.0) continue;
      beta[i] = std::clamp(beta[i] + step.t, -C, C);
      beta[j] = std::clamp(beta[j] - step.t, -C, C);
      load_row(j, row_j);
      for (int k = 0; k < n; ++k) grad[k] += step.t * (row_i[k] - row_j[k]);
      ++moves;
    }
    const double f_new = refresh();
    const double b = bias_for(Z, y, w, eps);
    out_log.dual_objective.push_back(f_new);
    out_log.primal_objective.push_back(primal_objective(Z, y, w, b, C, eps));
    out_log.passes = pass + 1;
    const double improvement = f - f_new;
    f = f_new;
    if (moves == 0 || improvement < cfg.tol * std::max(1.0, std::abs(f))) {
      out_log.converged = true;
      break;
    }
  }

  model.w = w;
  model.b = bias_for(Z, y, w, eps);
  if (!std::isfinite(model.b)) throw NumericError("SVR training produced a non-finite bias");
  for (double v : model.w) {
    if (!std::isfinite(v)) throw NumericError("SVR training produced non-finite weights");
  }
  return model;
}

double predict(const LinearSVRModel& model, const FeatureVector& x) {
  if (static_cast<int>(x.size()) != model.feature_dim) {
    throw DataError("feature vector of length " + std::to_string(x.size()) +
                    " does not match model dimension " + std::to_string(model.feature_dim));
  }
  double s = model.b;
  if (model.feature_mean.empty()) {
    for (int k = 0; k < model.feature_dim; ++k) s += model.w[k] * x[k];
  } else {
    for (int k = 0; k < model.feature_dim; ++k) {
      s += model.w[k] * ((x[k] - model.feature_mean[k]) / model.feature_scale[k]);
    }
  }
  return s;
}

std::vector<double> predict(const LinearSVRModel& model, std::span<const FeatureVector> X) {
  std::vector<double> out;
  out.reserve(X.size());
  for (const auto& x : X) out.push_back(predict(model, x));
  return out;
}

double objective(const LinearSVRModel& model, std::span<const FeatureVector> X,
                 std::span<const double> y, const SVRConfig& cfg) {
  if (X.size() != y.size()) throw DataError("objective: feature and target counts differ");
  const Dense Z = to_dense(X, model);
  return primal_objective(Z, y, model.w, model.b, cfg.C, cfg.epsilon);
}

}  // namespace biqa
