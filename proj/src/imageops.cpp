// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include "biqa/imageops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "biqa/error.hpp"
#include "biqa/rng.hpp"

namespace biqa {

RasterImage::RasterImage(int w, int h, float fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * kChannels, fill) {
  if (w < 0 || h < 0) throw DataError("negative image dimensions");
}

RasterImage resize_shorter_side(const RasterImage& image, int target) {
  if (target < 1) throw UsageError("resize target must be >= 1");
  if (image.empty()) throw DataError("cannot resize a degenerate image");
  const long w = image.width, h = image.height;
  int out_w = 0, out_h = 0;
  if (w <= h) {
    out_w = target;
    out_h = static_cast<int>((2 * h * target + w) / (2 * w));
  } else {
    out_h = target;
    out_w = static_cast<int>((2 * w * target + h) / (2 * h));
  }
  if (out_w == image.width && out_h == image.height) return image;

  const double sx = static_cast<double>(w) / out_w;
  const double sy = static_cast<double>(h) / out_h;
  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int out, double scale, int in) {
    std::vector<Tap> t(out);
    for (int i = 0; i < out; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const int i0 = static_cast<int>(std::floor(s));
      t[i] = {i0, std::min(i0 + 1, in - 1), s - i0};
    }
    return t;
  };
  const auto tx = taps(out_w, sx, image.width);
  const auto ty = taps(out_h, sy, image.height);

  RasterImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const auto& vy = ty[y];
    for (int x = 0; x < out_w; ++x) {
      const auto& vx = tx[x];
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        const double top = image.at(vx.i0, vy.i0, c) * (1.0 - vx.f) + image.at(vx.i1, vy.i0, c) * vx.f;
        const double bot = image.at(vx.i0, vy.i1, c) * (1.0 - vx.f) + image.at(vx.i1, vy.i1, c) * vx.f;
        out.at(x, y, c) = static_cast<float>(top * (1.0 - vy.f) + bot * vy.f);
      }
    }
  }
  return out;
}

Crop extract_crop(const RasterImage& image, int x, int y, int size) {
  if (size < 1) throw UsageError("crop size must be >= 1");
  if (x < 0 || y < 0 || x + size > image.width || y + size > image.height) {
    throw DataError("crop " + std::to_string(size) + "x" + std::to_string(size) + " at (" +
                    std::to_string(x) + "," + std::to_string(y) + ") exceeds " +
                    std::to_string(image.width) + "x" + std::to_string(image.height) + " image");
  }
  Crop crop{RasterImage(size, size), x, y};
  const std::size_t row = static_cast<std::size_t>(size) * RasterImage::kChannels;
  for (int r = 0; r < size; ++r) {
    const auto src = image.pixels.begin() + static_cast<std::ptrdiff_t>(image.index(x, y + r, 0));
    std::copy(src, src + static_cast<std::ptrdiff_t>(row),
              crop.image.pixels.begin() + static_cast<std::ptrdiff_t>(r * row));
  }
  return crop;
}

Crop center_crop(const RasterImage& image, int size) {
  if (size > image.width || size > image.height) {
    throw DataError("center crop " + std::to_string(size) + " larger than " +
                    std::to_string(image.width) + "x" + std::to_string(image.height) + " image");
  }
  return extract_crop(image, (image.width - size) / 2, (image.height - size) / 2, size);
}

std::vector<std::array<int, 2>> random_crop_origins(int width, int height, int n, int size,
                                                    std::uint64_t seed, bool* with_replacement) {
  if (n < 1) throw UsageError("crop count must be >= 1");
  if (size < 1) throw UsageError("crop size must be >= 1");
  if (size > width || size > height) {
    throw DataError("crop size " + std::to_string(size) + " exceeds " + std::to_string(width) +
                    "x" + std::to_string(height) + " image");
  }
  const std::uint64_t nx = static_cast<std::uint64_t>(width - size + 1);
  const std::uint64_t ny = static_cast<std::uint64_t>(height - size + 1);
  const std::uint64_t grid = nx * ny;

  Rng rng(seed);
  std::vector<std::array<int, 2>> origins;
  origins.reserve(static_cast<std::size_t>(n));
  std::unordered_set<std::uint64_t> used;
  // Distinct origins first (sequential rejection keeps prefixes stable), then
  // with replacement once the grid is exhausted.
  for (int i = 0; i < n; ++i) {
    std::uint64_t k = rng.below(grid);
    if (used.size() < grid) {
      while (!used.insert(k).second) k = rng.below(grid);
    }
    origins.push_back({static_cast<int>(k % nx), static_cast<int>(k / nx)});
  }
  if (with_replacement) *with_replacement = static_cast<std::uint64_t>(n) > grid;
  return origins;
}

CropSample random_crops(const RasterImage& image, int n, int size, std::uint64_t seed) {
  CropSample sample;
  const auto origins =
      random_crop_origins(image.width, image.height, n, size, seed, &sample.with_replacement);
  sample.crops.reserve(origins.size());
  for (const auto& [x, y] : origins) sample.crops.push_back(extract_crop(image, x, y, size));
  return sample;
}

Crop subtract_mean(const Crop& crop, const MeanImage& mean) {
  Crop out = crop;
  auto& px = out.image.pixels;
  if (mean.raster) {
    if (mean.raster->width != crop.image.width || mean.raster->height != crop.image.height) {
      throw DataError("mean image " + std::to_string(mean.raster->width) + "x" +
                      std::to_string(mean.raster->height) + " does not match crop size " +
                      std::to_string(crop.image.width));
    }
    for (std::size_t i = 0; i < px.size(); ++i) px[i] -= mean.raster->pixels[i];
    return out;
  }
  for (std::size_t i = 0; i < px.size(); ++i) px[i] -= mean.channel[i % RasterImage::kChannels];
  return out;
}

MeanImage channel_mean(const std::vector<RasterImage>& images) {
  std::array<double, 3> sum{};
  std::size_t count = 0;
  for (const auto& im : images) {
    for (std::size_t i = 0; i < im.pixels.size(); ++i) sum[i % 3] += im.pixels[i];
    count += im.pixels.size() / 3;
  }
  if (count == 0) throw DataError("mean of an empty image set");
  return MeanImage::per_channel(static_cast<float>(sum[0] / count),
                                static_cast<float>(sum[1] / count),
                                static_cast<float>(sum[2] / count));
}

// ---------------------------------------------------------------------------

RasterImage gaussian_blur(const RasterImage& image, double sigma) {
  if (sigma <= 0.0) return image;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (auto& k : kernel) k /= total;

  const int w = image.width, h = image.height;
  RasterImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * image.at(std::clamp(x + k, 0, w - 1), y, c);
        }
        tmp.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * tmp.at(x, std::clamp(y + k, 0, h - 1), c);
        }
        out.at(x, y, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

namespace {

RasterImage add_noise(const RasterImage& image, double sigma, std::uint64_t seed) {
  RasterImage out = image;
  Rng rng(seed);
  for (auto& p : out.pixels) {
    p = static_cast<float>(std::clamp(p + sigma * rng.normal(), 0.0, 255.0));
  }
  return out;
}

RasterImage block_quantize(const RasterImage& image, double blend) {
  constexpr int kBlock = 8;
  RasterImage out = image;
  for (int by = 0; by < image.height; by += kBlock) {
    for (int bx = 0; bx < image.width; bx += kBlock) {
      const int ex = std::min(bx + kBlock, image.width);
      const int ey = std::min(by + kBlock, image.height);
      for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x) sum += image.at(x, y, c);
        const double mean = sum / ((ex - bx) * (ey - by));
        for (int y = by; y < ey; ++y)
          for (int x = bx; x < ex; ++x)
            out.at(x, y, c) = static_cast<float>((1.0 - blend) * image.at(x, y, c) + blend * mean);
      }
    }
  }
  return out;
}

}  // namespace

RasterImage apply_distortion(const RasterImage& image, DistortionKind kind, double level,
                             std::uint64_t seed, double level_max) {
  if (!(level >= 0.0) || !std::isfinite(level)) throw UsageError("distortion level must be >= 0");
  if (level == 0.0) return image;
  switch (kind) {
    case DistortionKind::kGaussianBlur:
      return gaussian_blur(image, level);
    case DistortionKind::kGaussianNoise:
      return add_noise(image, 5.0 * level, seed);
    case DistortionKind::kBlockQuantize:
      if (!(level_max > 0.0)) throw UsageError("block-quantize level_max must be > 0");
      return block_quantize(image, std::min(level / level_max, 1.0));
  }
  throw UsageError("unknown distortion kind");
}

RasterImage quantize_8bit(const RasterImage& image) {
  RasterImage out = image;
  for (auto& p : out.pixels) p = std::clamp(std::nearbyint(p), 0.0f, 255.0f);
  return out;
}

}  // namespace biqa
