// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "biqa/rng.hpp"

namespace oracle {

namespace fs = std::filesystem;

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

std::vector<double> midranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    int smaller = 0, equal = 0;
    for (double u : v) {
      smaller += u < v[i];
      equal += u == v[i];
    }
    r[i] = 1.0 + smaller + (equal - 1) / 2.0;
  }
  return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(midranks(x), midranks(y));
}

Errors error_stats(const std::vector<double>& pred, const std::vector<double>& truth, double width) {
  long double sq = 0, ab = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const long double e = static_cast<long double>(pred[i]) - truth[i];
    sq += e * e;
    ab += std::fabs(e);
  }
  const long double n = pred.size();
  return {static_cast<double>(100.0L * std::sqrt(sq / n) / width), static_cast<double>(100.0L * (ab / n) / width)};
}

double t_density(double x, double df) {
  const double log_c = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * M_PI);
  return std::exp(log_c - (df + 1) / 2 * std::log1p(x * x / df));
}

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
               double whole, double tol, int depth) {
  const double m = (a + b) / 2, lm = (a + m) / 2, rm = (m + b) / 2;
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15 * tol) {
    return left + right + (left + right - whole) / 15;
  }
  return simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f((a + b) / 2);
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, 40);
}

}  // namespace

double t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  const double x = std::fabs(t);
  if (x == 0.0) return 1.0;
  auto f = [df](double u) { return t_density(u, df); };
  // Split the range so the peak near 0 and the tail get their own panels.
  double area = 0.0;
  double lo = 0.0;
  for (double hi : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 1e300}) {
    const double end = std::min(hi, x);
    area += integrate(f, lo, end, 1e-12);
    lo = end;
    if (end == x) break;
  }
  return std::clamp(1.0 - 2.0 * area, 0.0, 1.0);
}

TTest ttest(const std::vector<double>& a, const std::vector<double>& b) {
  auto mean = [](const std::vector<double>& v) {
    long double s = 0;
    for (double x : v) s += x;
    return s / v.size();
  };
  const long double ma = mean(a), mb = mean(b);
  long double ssa = 0, ssb = 0;
  for (double x : a) ssa += (x - ma) * (x - ma);
  for (double x : b) ssb += (x - mb) * (x - mb);
  const double df = static_cast<double>(a.size() + b.size() - 2);
  const long double sp2 = (ssa + ssb) / df;
  const long double se = std::sqrt(sp2 * (1.0L / a.size() + 1.0L / b.size()));
  const double t = static_cast<double>((ma - mb) / se);
  return {t, t_two_sided_p(t, df)};
}

// ---------------------------------------------------------------------------

NaiveForward desk_forward(const biqa::BasicDeskCnn<double>& net, const biqa::Crop& crop) {
  using biqa::DeskArchitecture;
  const DeskArchitecture& a = net.arch();
  const auto& P = net.params();
  const int s = a.input_size;
  auto in = [&](int c, int y, int x) {
    return (static_cast<double>(crop.image.at(x, y, c)) - a.mean[c]) * static_cast<double>(a.input_scale);
  };

  // conv1: 8 filters 5x5 stride 2, no padding, then relu
  const int o1 = (s - 5) / 2 + 1;
  std::vector<double> c1(8 * o1 * o1);
  for (int f = 0; f < 8; ++f)
    for (int oy = 0; oy < o1; ++oy)
      for (int ox = 0; ox < o1; ++ox) {
        double z = P[biqa::kConv1B][f];
        for (int c = 0; c < 3; ++c)
          for (int ky = 0; ky < 5; ++ky)
            for (int kx = 0; kx < 5; ++kx)
              z += P[biqa::kConv1W][((f * 3 + c) * 5 + ky) * 5 + kx] * in(c, oy * 2 + ky, ox * 2 + kx);
        c1[(f * o1 + oy) * o1 + ox] = std::max(z, 0.0);
      }
  // 2x2 max pool
  const int p1 = o1 / 2;
  std::vector<double> m1(8 * p1 * p1);
  for (int f = 0; f < 8; ++f)
    for (int y = 0; y < p1; ++y)
      for (int x = 0; x < p1; ++x) {
        double m = -std::numeric_limits<double>::infinity();
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) m = std::max(m, c1[(f * o1 + 2 * y + dy) * o1 + 2 * x + dx]);
        m1[(f * p1 + y) * p1 + x] = m;
      }
  // conv2: 16 filters 3x3, padding 1, then relu
  const int o2 = p1;
  std::vector<double> c2(16 * o2 * o2);
  for (int f = 0; f < 16; ++f)
    for (int oy = 0; oy < o2; ++oy)
      for (int ox = 0; ox < o2; ++ox) {
        double z = P[biqa::kConv2B][f];
        for (int c = 0; c < 8; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = oy + ky - 1, ix = ox + kx - 1;
              if (iy < 0 || ix < 0 || iy >= p1 || ix >= p1) continue;
              z += P[biqa::kConv2W][((f * 8 + c) * 3 + ky) * 3 + kx] * m1[(c * p1 + iy) * p1 + ix];
            }
        c2[(f * o2 + oy) * o2 + ox] = std::max(z, 0.0);
      }
  const int p2 = o2 / 2;
  std::vector<double> flat(16 * p2 * p2);
  for (int f = 0; f < 16; ++f)
    for (int y = 0; y < p2; ++y)
      for (int x = 0; x < p2; ++x) {
        double m = -std::numeric_limits<double>::infinity();
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) m = std::max(m, c2[(f * o2 + 2 * y + dy) * o2 + 2 * x + dx]);
        flat[(f * p2 + y) * p2 + x] = m;
      }

  NaiveForward out;
  const int d = a.feature_dim;
  out.features.resize(d);
  for (int j = 0; j < d; ++j) {
    double z = P[biqa::kFc1B][j];
    for (std::size_t i = 0; i < flat.size(); ++i) z += P[biqa::kFc1W][j * flat.size() + i] * flat[i];
    out.features[j] = std::max(z, 0.0);
  }
  out.logits.resize(5);
  for (int k = 0; k < 5; ++k) {
    double z = P[biqa::kFc2B][k];
    for (int j = 0; j < d; ++j) z += P[biqa::kFc2W][k * d + j] * out.features[j];
    out.logits[k] = z;
  }
  return out;
}

double xent(const std::vector<double>& logits, int label) {
  double z = 0;
  for (double v : logits) z += std::exp(v);
  return std::log(z) - logits[label];
}

double weighted_loss(const biqa::BasicDeskCnn<double>& net, const std::vector<biqa::Crop>& batch,
                     const std::vector<int>& labels, const std::vector<double>& weights) {
  double total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += weights[i] * xent(desk_forward(net, batch[i]).logits, labels[i]);
  }
  return total / static_cast<double>(batch.size());
}

biqa::ParamSet<double> fd_gradients(biqa::BasicDeskCnn<double> net, const std::vector<biqa::Crop>& batch,
                                    const std::vector<int>& labels, const std::vector<double>& weights,
                                    double h) {
  biqa::ParamSet<double> g;
  for (int p = 0; p < biqa::kNumParams; ++p) {
    auto& tensor = net.params()[p];
    g[p].resize(tensor.size());
    for (std::size_t k = 0; k < tensor.size(); ++k) {
      const double saved = tensor[k];
      tensor[k] = saved + h;
      const double up = weighted_loss(net, batch, labels, weights);
      tensor[k] = saved - h;
      const double down = weighted_loss(net, batch, labels, weights);
      tensor[k] = saved;
      g[p][k] = (up - down) / (2 * h);
    }
  }
  return g;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

// ---------------------------------------------------------------------------

double svr_objective(const std::vector<double>& w, double b, const std::vector<std::vector<double>>& X,
                     const std::vector<double>& y, double C, double eps) {
  double reg = 0;
  for (double v : w) reg += v * v;
  double loss = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double f = b;
    for (std::size_t k = 0; k < w.size(); ++k) f += w[k] * X[i][k];
    loss += std::max(0.0, std::fabs(f - y[i]) - eps);
  }
  return 0.5 * reg + C * loss;
}

namespace {

// min over b of the objective for fixed w; the minimum of a convex
// piecewise-linear function sits on one of its breakpoints.
std::pair<double, double> best_b(const std::vector<double>& w, const std::vector<std::vector<double>>& X,
                                 const std::vector<double>& y, double C, double eps) {
  double best = std::numeric_limits<double>::infinity(), arg = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    double r = y[i];
    for (std::size_t k = 0; k < w.size(); ++k) r -= w[k] * X[i][k];
    for (double b : {r - eps, r + eps}) {
      const double v = svr_objective(w, b, X, y, C, eps);
      if (v < best) {
        best = v;
        arg = b;
      }
    }
  }
  return {best, arg};
}

double ternary(const std::function<double(double)>& f, double lo, double hi, double* arg) {
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::fabs(lo)); ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (f(m1) < f(m2)) hi = m2;
    else lo = m1;
  }
  *arg = (lo + hi) / 2;
  return f(*arg);
}

}  // namespace

SvrOptimum svr_brute_force(const std::vector<std::vector<double>>& X, const std::vector<double>& y, double C,
                           double eps) {
  const std::size_t D = X.at(0).size();
  if (D < 1 || D > 2) throw std::invalid_argument("svr_brute_force handles D = 1 or 2");
  // 1/2 |w|^2 <= J(w*) <= J(0, b) bounds every coordinate.
  const double R = std::sqrt(2.0 * best_b(std::vector<double>(D, 0.0), X, y, C, eps).first) + 1e-9;
  SvrOptimum out;
  out.w.assign(D, 0.0);
  if (D == 1) {
    auto f = [&](double w0) { return best_b({w0}, X, y, C, eps).first; };
    ternary(f, -R, R, &out.w[0]);
  } else {
    auto inner = [&](double w0, double* w1) {
      auto g = [&](double v) { return best_b({w0, v}, X, y, C, eps).first; };
      return ternary(g, -R, R, w1);
    };
    auto f = [&](double w0) {
      double w1;
      return inner(w0, &w1);
    };
    ternary(f, -R, R, &out.w[0]);
    inner(out.w[0], &out.w[1]);
  }
  const auto [obj, b] = best_b(out.w, X, y, C, eps);
  out.b = b;
  out.objective = obj;
  return out;
}

// ---------------------------------------------------------------------------

biqa::Crop random_crop(int size, std::uint64_t seed) {
  biqa::Rng rng(seed);
  biqa::RasterImage img(size, size);
  for (auto& p : img.pixels) p = static_cast<float>(rng.uniform() * 255.0);
  return biqa::Crop{img, 0, 0};
}

biqa::DeskCnn random_net(int input_size, int feature_dim, std::uint64_t seed) {
  biqa::DeskArchitecture arch;
  arch.input_size = input_size;
  arch.feature_dim = feature_dim;
  biqa::DeskCnn net = biqa::DeskCnn::initialized(arch, seed);
  biqa::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (int p : {biqa::kConv1B, biqa::kConv2B, biqa::kFc1B, biqa::kFc2B}) {
    for (auto& v : net.params()[p]) v = static_cast<float>(0.2 * rng.uniform() - 0.1);
  }
  // A head with some weight so the upstream gradients are not tiny.
  for (auto& v : net.params()[biqa::kFc2W]) v = static_cast<float>(0.5 * rng.normal());
  return net;
}

TempDir::TempDir(const std::string& prefix) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace oracle
