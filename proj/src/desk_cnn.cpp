// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "biqa/backbone.hpp"
#include "biqa/error.hpp"
#include "biqa/rng.hpp"

namespace biqa {

void DeskArchitecture::validate() const {
  if (input_size < kConv1Kernel || pool2_out() < 1) {
    throw UsageError("desk CNN input size " + std::to_string(input_size) +
                     " too small (pooled maps collapse)");
  }
  if (feature_dim < 1) throw UsageError("desk CNN feature_dim must be >= 1");
  if (!(input_scale > 0.0f) || !std::isfinite(input_scale)) {
    throw UsageError("desk CNN input_scale must be > 0");
  }
}

const char* param_name(ParamId id) {
  static constexpr const char* kNames[kNumParams] = {"conv1.weight", "conv1.bias", "conv2.weight",
                                                     "conv2.bias",   "fc1.weight", "fc1.bias",
                                                     "fc2.weight",   "fc2.bias"};
  return kNames[id];
}

namespace {

struct ConvGeom {
  int in_ch, in_size, out_ch, kernel, stride, pad, out_size;
};

// z[f][oy][ox] = b[f] + sum_{c,ky,kx} w[f][c][ky][kx] * in[c][oy*s+ky-p][ox*s+kx-p]
// Each output sums its taps in (c, ky, kx) order; the filters are
// accumulated side by side over an im2col buffer.
template <typename T>
void conv_forward(const ConvGeom& g, const std::vector<T>& in, const std::vector<T>& w,
                  const std::vector<T>& b, std::vector<T>& out) {
  const int k = g.kernel;
  const int taps = g.in_ch * k * k;
  const int positions = g.out_size * g.out_size;
  thread_local std::vector<double> cols, wt, acc;
  cols.assign(static_cast<std::size_t>(positions) * taps, 0.0);
  for (int oy = 0; oy < g.out_size; ++oy) {
    for (int ox = 0; ox < g.out_size; ++ox) {
      double* col = &cols[static_cast<std::size_t>(oy * g.out_size + ox) * taps];
      const int iy0 = oy * g.stride - g.pad, ix0 = ox * g.stride - g.pad;
      const int ky0 = std::max(0, -iy0), ky1 = std::min(k, g.in_size - iy0);
      const int kx0 = std::max(0, -ix0), kx1 = std::min(k, g.in_size - ix0);
      for (int c = 0; c < g.in_ch; ++c) {
        const T* plane = &in[static_cast<std::size_t>(c) * g.in_size * g.in_size];
        for (int ky = ky0; ky < ky1; ++ky) {
          const T* row = plane + static_cast<std::size_t>(iy0 + ky) * g.in_size + ix0;
          double* dst = col + (c * k + ky) * k;
          for (int kx = kx0; kx < kx1; ++kx) dst[kx] = static_cast<double>(row[kx]);
        }
      }
    }
  }
  // wt[j][f] = w[f][j]
  wt.resize(static_cast<std::size_t>(taps) * g.out_ch);
  for (int f = 0; f < g.out_ch; ++f) {
    for (int j = 0; j < taps; ++j) {
      wt[static_cast<std::size_t>(j) * g.out_ch + f] = static_cast<double>(w[static_cast<std::size_t>(f) * taps + j]);
    }
  }
  out.resize(static_cast<std::size_t>(g.out_ch) * positions);
  acc.resize(static_cast<std::size_t>(g.out_ch));
  for (int p = 0; p < positions; ++p) {
    for (int f = 0; f < g.out_ch; ++f) acc[f] = static_cast<double>(b[f]);
    const double* col = &cols[static_cast<std::size_t>(p) * taps];
    for (int j = 0; j < taps; ++j) {
      const double x = col[j];
      const double* wj = &wt[static_cast<std::size_t>(j) * g.out_ch];
      for (int f = 0; f < g.out_ch; ++f) acc[f] += wj[f] * x;
    }
    for (int f = 0; f < g.out_ch; ++f) out[static_cast<std::size_t>(f) * positions + p] = static_cast<T>(acc[f]);
  }
}

// Accumulates dW, db and (optionally) d_in from dz.
template <typename T>
void conv_backward(const ConvGeom& g, const std::vector<T>& in, const std::vector<T>& w,
                   const std::vector<double>& dz, std::vector<double>& dw, std::vector<double>& db,
                   std::vector<double>* d_in) {
  const int k = g.kernel;
  if (d_in) d_in->assign(static_cast<std::size_t>(g.in_ch) * g.in_size * g.in_size, 0.0);
  for (int f = 0; f < g.out_ch; ++f) {
    for (int oy = 0; oy < g.out_size; ++oy) {
      for (int ox = 0; ox < g.out_size; ++ox) {
        const double d = dz[(static_cast<std::size_t>(f) * g.out_size + oy) * g.out_size + ox];
        if (d == 0.0) continue;
        db[f] += d;
        const int iy0 = oy * g.stride - g.pad, ix0 = ox * g.stride - g.pad;
        const int ky0 = std::max(0, -iy0), ky1 = std::min(k, g.in_size - iy0);
        const int kx0 = std::max(0, -ix0), kx1 = std::min(k, g.in_size - ix0);
        for (int c = 0; c < g.in_ch; ++c) {
          const std::size_t wbase = ((static_cast<std::size_t>(f) * g.in_ch + c) * k) * k;
          const std::size_t pbase = static_cast<std::size_t>(c) * g.in_size * g.in_size;
          for (int ky = ky0; ky < ky1; ++ky) {
            const std::size_t rbase = pbase + static_cast<std::size_t>(iy0 + ky) * g.in_size + ix0;
            double* dwr = &dw[wbase + ky * k];
            const T* row = &in[rbase];
            for (int kx = kx0; kx < kx1; ++kx) dwr[kx] += d * static_cast<double>(row[kx]);
            if (d_in) {
              double* dir = &(*d_in)[rbase];
              const T* wr = &w[wbase + ky * k];
              for (int kx = kx0; kx < kx1; ++kx) dir[kx] += d * static_cast<double>(wr[kx]);
            }
          }
        }
      }
    }
  }
}

// 2x2/2 max pooling over relu(in); `arg` holds flat indices into `in`.
template <typename T>
void relu_pool_forward(const std::vector<T>& in, int channels, int in_size, int out_size,
                       std::vector<T>& out, std::vector<int>& arg) {
  out.assign(static_cast<std::size_t>(channels) * out_size * out_size, T{0});
  arg.assign(out.size(), 0);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < out_size; ++y) {
      for (int x = 0; x < out_size; ++x) {
        int best = -1;
        T best_v = T{0};
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (c * in_size + 2 * y + dy) * in_size + 2 * x + dx;
            if (best < 0 || in[idx] > best_v) {
              best = idx;
              best_v = in[idx];
            }
          }
        }
        const std::size_t o = (static_cast<std::size_t>(c) * out_size + y) * out_size + x;
        out[o] = best_v > T{0} ? best_v : T{0};
        arg[o] = best;
      }
    }
  }
}

// Routes d_out back through the pooling and the ReLU before it.
template <typename T>
void relu_pool_backward(const std::vector<T>& in, const std::vector<int>& arg,
                        const std::vector<double>& d_out, std::vector<double>& d_in) {
  d_in.assign(in.size(), 0.0);
  for (std::size_t o = 0; o < d_out.size(); ++o) {
    const int i = arg[o];
    if (in[i] > T{0}) d_in[i] += d_out[o];
  }
}

}  // namespace

template <typename T>
BasicDeskCnn<T>::BasicDeskCnn(DeskArchitecture arch) : arch_(arch) {
  arch_.validate();
  for (int p = 0; p < kNumParams; ++p) {
    std::size_t n = 1;
    for (int d : param_shape(static_cast<ParamId>(p))) n *= static_cast<std::size_t>(d);
    params_[p].assign(n, T{0});
  }
}

template <typename T>
std::vector<int> BasicDeskCnn<T>::param_shape(ParamId id) const {
  using A = DeskArchitecture;
  switch (id) {
    case kConv1W: return {A::kConv1Filters, 3, A::kConv1Kernel, A::kConv1Kernel};
    case kConv1B: return {A::kConv1Filters};
    case kConv2W: return {A::kConv2Filters, A::kConv1Filters, A::kConv2Kernel, A::kConv2Kernel};
    case kConv2B: return {A::kConv2Filters};
    case kFc1W: return {arch_.feature_dim, arch_.flat_size()};
    case kFc1B: return {arch_.feature_dim};
    case kFc2W: return {A::kClasses, arch_.feature_dim};
    case kFc2B: return {A::kClasses};
    default: break;
  }
  throw UsageError("bad parameter id");
}

template <typename T>
std::size_t BasicDeskCnn<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

template <typename T>
BasicDeskCnn<T> BasicDeskCnn<T>::initialized(DeskArchitecture arch, std::uint64_t seed) {
  BasicDeskCnn net(arch);
  Rng rng(derive_seed(seed, "desk-init"));
  auto fill = [&](ParamId id, double std) {
    for (auto& v : net.params_[id]) v = static_cast<T>(std * rng.normal());
  };
  using A = DeskArchitecture;
  fill(kConv1W, std::sqrt(2.0 / (3 * A::kConv1Kernel * A::kConv1Kernel)));
  fill(kConv2W, std::sqrt(2.0 / (A::kConv1Filters * A::kConv2Kernel * A::kConv2Kernel)));
  fill(kFc1W, std::sqrt(2.0 / net.arch_.flat_size()));
  fill(kFc2W, 0.01);
  return net;
}

template <typename T>
void BasicDeskCnn<T>::reset_head(double std, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "head-init"));
  for (auto& v : params_[kFc2W]) v = static_cast<T>(std * rng.normal());
  std::fill(params_[kFc2B].begin(), params_[kFc2B].end(), T{0});
}

template <typename T>
std::vector<T> BasicDeskCnn<T>::normalize(const Crop& crop) const {
  const int s = arch_.input_size;
  if (crop.image.width != s || crop.image.height != s) {
    throw DataError("crop is " + std::to_string(crop.image.width) + "x" +
                    std::to_string(crop.image.height) + ", network expects " + std::to_string(s) +
                    "x" + std::to_string(s));
  }
  std::vector<T> chw(static_cast<std::size_t>(3) * s * s);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      for (int c = 0; c < 3; ++c) {
        chw[(static_cast<std::size_t>(c) * s + y) * s + x] =
            (static_cast<T>(crop.image.at(x, y, c)) - static_cast<T>(arch_.mean[c])) *
            static_cast<T>(arch_.input_scale);
      }
    }
  }
  return chw;
}

template <typename T>
void BasicDeskCnn<T>::forward_one(const std::vector<T>& input, SampleCache& s) const {
  using A = DeskArchitecture;
  const ConvGeom g1{3, arch_.input_size, A::kConv1Filters, A::kConv1Kernel, A::kConv1Stride, 0,
                    arch_.conv1_out()};
  const ConvGeom g2{A::kConv1Filters, arch_.pool1_out(), A::kConv2Filters, A::kConv2Kernel, 1,
                    A::kConv2Pad, arch_.conv2_out()};
  s.input = input;
  conv_forward(g1, s.input, params_[kConv1W], params_[kConv1B], s.conv1);
  relu_pool_forward(s.conv1, A::kConv1Filters, g1.out_size, arch_.pool1_out(), s.pool1, s.pool1_arg);
  conv_forward(g2, s.pool1, params_[kConv2W], params_[kConv2B], s.conv2);
  relu_pool_forward(s.conv2, A::kConv2Filters, g2.out_size, arch_.pool2_out(), s.pool2, s.pool2_arg);

  const int d = arch_.feature_dim, flat = arch_.flat_size();
  s.fc1.assign(static_cast<std::size_t>(d), T{0});
  s.features.assign(static_cast<std::size_t>(d), T{0});
  for (int j = 0; j < d; ++j) {
    double acc = static_cast<double>(params_[kFc1B][j]);
    const T* wrow = &params_[kFc1W][static_cast<std::size_t>(j) * flat];
    for (int i = 0; i < flat; ++i) acc += static_cast<double>(wrow[i]) * static_cast<double>(s.pool2[i]);
    s.fc1[j] = static_cast<T>(acc);
    s.features[j] = s.fc1[j] > T{0} ? s.fc1[j] : T{0};
  }
}

template <typename T>
LogitMatrix BasicDeskCnn<T>::forward_normalized(std::span<const std::vector<T>> inputs,
                                                Cache* cache) const {
  const int d = arch_.feature_dim;
  LogitMatrix logits{static_cast<int>(inputs.size()),
                     std::vector<double>(inputs.size() * kNumQualityClasses, 0.0)};
  std::vector<SampleCache> local;
  std::vector<SampleCache>& samples = cache ? cache->samples : local;
  samples.assign(inputs.size(), SampleCache{});
  if (cache) cache->owner = this;
  const std::size_t expected = static_cast<std::size_t>(3) * arch_.input_size * arch_.input_size;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    if (inputs[b].size() != expected) throw DataError("network input has wrong size");
    SampleCache& s = samples[b];
    forward_one(inputs[b], s);
    for (int k = 0; k < kNumQualityClasses; ++k) {
      double acc = static_cast<double>(params_[kFc2B][k]);
      const T* wrow = &params_[kFc2W][static_cast<std::size_t>(k) * d];
      for (int j = 0; j < d; ++j) acc += static_cast<double>(wrow[j]) * static_cast<double>(s.features[j]);
      logits.at(static_cast<int>(b), k) = static_cast<double>(static_cast<T>(acc));
    }
  }
  return logits;
}

template <typename T>
LogitMatrix BasicDeskCnn<T>::forward(std::span<const Crop> batch, Cache* cache) const {
  std::vector<std::vector<T>> inputs;
  inputs.reserve(batch.size());
  for (const auto& crop : batch) inputs.push_back(normalize(crop));
  return forward_normalized(inputs, cache);
}

template <typename T>
ParamSet<double> BasicDeskCnn<T>::backward(const Cache& cache, const LogitMatrix& grad_logits) const {
  using A = DeskArchitecture;
  if (cache.owner != this) throw UsageError("backward called with a cache from another network");
  if (grad_logits.rows != static_cast<int>(cache.samples.size())) {
    throw UsageError("gradient rows do not match the cached batch");
  }
  ParamSet<double> grads;
  for (int p = 0; p < kNumParams; ++p) grads[p].assign(params_[p].size(), 0.0);

  const ConvGeom g1{3, arch_.input_size, A::kConv1Filters, A::kConv1Kernel, A::kConv1Stride, 0,
                    arch_.conv1_out()};
  const ConvGeom g2{A::kConv1Filters, arch_.pool1_out(), A::kConv2Filters, A::kConv2Kernel, 1,
                    A::kConv2Pad, arch_.conv2_out()};
  const int d = arch_.feature_dim, flat = arch_.flat_size();

  std::vector<double> d_feat(d), d_fc1(d), d_pool2(flat), d_conv2, d_pool1, d_conv1;
  for (std::size_t b = 0; b < cache.samples.size(); ++b) {
    const SampleCache& s = cache.samples[b];
    bool any = false;
    for (int k = 0; k < kNumQualityClasses; ++k) any |= grad_logits.at(static_cast<int>(b), k) != 0.0;
    if (!any) continue;

    std::fill(d_feat.begin(), d_feat.end(), 0.0);
    for (int k = 0; k < kNumQualityClasses; ++k) {
      const double g = grad_logits.at(static_cast<int>(b), k);
      grads[kFc2B][k] += g;
      for (int j = 0; j < d; ++j) {
        grads[kFc2W][static_cast<std::size_t>(k) * d + j] += g * static_cast<double>(s.features[j]);
        d_feat[j] += g * static_cast<double>(params_[kFc2W][static_cast<std::size_t>(k) * d + j]);
      }
    }
    std::fill(d_pool2.begin(), d_pool2.end(), 0.0);
    for (int j = 0; j < d; ++j) {
      d_fc1[j] = s.fc1[j] > T{0} ? d_feat[j] : 0.0;
      if (d_fc1[j] == 0.0) continue;
      grads[kFc1B][j] += d_fc1[j];
      const std::size_t row = static_cast<std::size_t>(j) * flat;
      for (int i = 0; i < flat; ++i) {
        grads[kFc1W][row + i] += d_fc1[j] * static_cast<double>(s.pool2[i]);
        d_pool2[i] += d_fc1[j] * static_cast<double>(params_[kFc1W][row + i]);
      }
    }
    relu_pool_backward(s.conv2, s.pool2_arg, d_pool2, d_conv2);
    conv_backward(g2, s.pool1, params_[kConv2W], d_conv2, grads[kConv2W], grads[kConv2B], &d_pool1);
    relu_pool_backward(s.conv1, s.pool1_arg, d_pool1, d_conv1);
    conv_backward(g1, s.input, params_[kConv1W], d_conv1, grads[kConv1W], grads[kConv1B], nullptr);
  }
  return grads;
}

template <typename T>
FeatureVector BasicDeskCnn<T>::features(const Crop& crop) const {
  SampleCache s;
  forward_one(normalize(crop), s);
  return FeatureVector(s.features.begin(), s.features.end());
}

template class BasicDeskCnn<float>;
template class BasicDeskCnn<double>;

// ---------------------------------------------------------------------------

LossResult weighted_softmax_xent(const LogitMatrix& logits, std::span<const QualityClass> labels,
                                 std::span<const double> weights) {
  const int rows = logits.rows;
  if (labels.size() != static_cast<std::size_t>(rows) || weights.size() != labels.size()) {
    throw UsageError("labels/weights do not match the logit rows");
  }
  if (rows == 0) throw UsageError("empty batch");
  LossResult out{0.0, LogitMatrix{rows, std::vector<double>(logits.values.size(), 0.0)}};
  for (int r = 0; r < rows; ++r) {
    if (!(weights[r] > 0.0)) throw UsageError("sample weights must be > 0");
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kNumQualityClasses; ++k) {
      const double v = logits.at(r, k);
      if (!std::isfinite(v)) throw NumericError("non-finite logit in row " + std::to_string(r));
      mx = std::max(mx, v);
    }
    double z = 0.0;
    for (int k = 0; k < kNumQualityClasses; ++k) z += std::exp(logits.at(r, k) - mx);
    const double log_z = mx + std::log(z);
    const int y = static_cast<int>(labels[r]);
    out.loss += weights[r] * (log_z - logits.at(r, y));
    const double scale = weights[r] / rows;
    for (int k = 0; k < kNumQualityClasses; ++k) {
      const double p = std::exp(logits.at(r, k) - log_z);
      out.grad.at(r, k) = scale * (p - (k == y ? 1.0 : 0.0));
    }
  }
  out.loss /= rows;
  return out;
}

}  // namespace biqa
