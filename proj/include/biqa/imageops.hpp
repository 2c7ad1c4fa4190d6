// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "biqa/dataset.hpp"

namespace biqa {

// Dense RGB raster, row-major, channels interleaved (H x W x 3).
struct RasterImage {
  static constexpr int kChannels = 3;

  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  RasterImage() = default;
  RasterImage(int w, int h, float fill = 0.0f);

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * kChannels + c;
  }
  float& at(int x, int y, int c) { return pixels[index(x, y, c)]; }
  float at(int x, int y, int c) const { return pixels[index(x, y, c)]; }

  bool empty() const { return width == 0 || height == 0; }
  bool operator==(const RasterImage&) const = default;
};

// Square sub-image with its top-left offset in the source image.
struct Crop {
  RasterImage image;
  int x = 0;
  int y = 0;

  int size() const { return image.width; }
};

// Either per-channel scalar means or a full raster matching the crop size.
struct MeanImage {
  std::array<float, 3> channel{0.0f, 0.0f, 0.0f};
  std::optional<RasterImage> raster;

  static MeanImage per_channel(float r, float g, float b) { return {{r, g, b}, std::nullopt}; }
  static MeanImage full(RasterImage raster) { return {{0, 0, 0}, std::move(raster)}; }
};

// Bilinear resize so that the shorter side equals `target`; the other side is
// rounded to nearest. Pixel centres are aligned (src = (dst + 0.5) * s - 0.5).
RasterImage resize_shorter_side(const RasterImage& image, int target);

Crop extract_crop(const RasterImage& image, int x, int y, int size);

// Origin ((W - size) / 2, (H - size) / 2), rounded down. No upscaling.
Crop center_crop(const RasterImage& image, int size);

struct CropSample {
  std::vector<Crop> crops;
  // True when more crops were requested than distinct origins exist.
  bool with_replacement = false;
};

// `n` crops at native scale with uniformly drawn origins. Origins are
// distinct whenever the offset grid is large enough. The first k crops of a
// request for n >= k crops equal a request for k crops with the same seed.
CropSample random_crops(const RasterImage& image, int n, int size, std::uint64_t seed);

// Only the origins; used when pixels are not needed (precomputed features).
std::vector<std::array<int, 2>> random_crop_origins(int width, int height, int n, int size,
                                                    std::uint64_t seed, bool* with_replacement);

Crop subtract_mean(const Crop& crop, const MeanImage& mean);

// Per-channel mean of an image collection.
MeanImage channel_mean(const std::vector<RasterImage>& images);

// Level 0 is the identity for every kind. Blur uses sigma = level; noise adds
// N(0, (5 level)^2) and clips to [0, 255]; block-quantize blends each 8x8
// block towards its mean with factor min(level / level_max, 1).
RasterImage apply_distortion(const RasterImage& image, DistortionKind kind, double level,
                             std::uint64_t seed, double level_max = 4.0);

RasterImage gaussian_blur(const RasterImage& image, double sigma);

// ---------------------------------------------------------------------------
// Lossless image I/O (8-bit RGB). Grey and alpha inputs are expanded/dropped.

RasterImage read_image(const std::filesystem::path& path);
void write_png(const RasterImage& image, const std::filesystem::path& path);
void write_bmp(const RasterImage& image, const std::filesystem::path& path);

// Round-and-clamp to the 8-bit grid, as stored by the writers.
RasterImage quantize_8bit(const RasterImage& image);

}  // namespace biqa
