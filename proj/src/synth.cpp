// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "biqa/dataset.hpp"
#include "biqa/error.hpp"
#include "biqa/imageops.hpp"
#include "biqa/rng.hpp"

namespace biqa {

namespace fs = std::filesystem;

std::string_view to_string(DistortionKind k) {
  switch (k) {
    case DistortionKind::kGaussianBlur: return "gaussian-blur";
    case DistortionKind::kGaussianNoise: return "gaussian-noise";
    case DistortionKind::kBlockQuantize: return "block-quantize";
  }
  return "?";
}

DistortionKind parse_distortion_kind(std::string_view text) {
  if (text == "gaussian-blur" || text == "blur") return DistortionKind::kGaussianBlur;
  if (text == "gaussian-noise" || text == "additive-gaussian-noise" || text == "noise") {
    return DistortionKind::kGaussianNoise;
  }
  if (text == "block-quantize" || text == "jpeg-like" || text == "block") {
    return DistortionKind::kBlockQuantize;
  }
  throw UsageError("unknown distortion kind '" + std::string(text) + "'");
}

namespace {

struct Color {
  double r, g, b;
};

Color random_color(Rng& rng) { return {255 * rng.uniform(), 255 * rng.uniform(), 255 * rng.uniform()}; }

void paint_shapes(RasterImage& im, Rng& rng, int count) {
  for (int s = 0; s < count; ++s) {
    const Color col = random_color(rng);
    const double cx = rng.uniform() * im.width, cy = rng.uniform() * im.height;
    const double rx = (0.08 + 0.25 * rng.uniform()) * im.width;
    const double ry = (0.08 + 0.25 * rng.uniform()) * im.height;
    const bool disc = rng.uniform() < 0.5;
    for (int y = 0; y < im.height; ++y) {
      for (int x = 0; x < im.width; ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        const bool inside = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        if (!inside) continue;
        im.at(x, y, 0) = static_cast<float>(col.r);
        im.at(x, y, 1) = static_cast<float>(col.g);
        im.at(x, y, 2) = static_cast<float>(col.b);
      }
    }
  }
}

RasterImage base_image(const SynthSpec& spec, Rng& rng) {
  RasterImage im(spec.width, spec.height);
  const Color a = random_color(rng), b = random_color(rng);
  const double angle = 2 * std::numbers::pi * rng.uniform();
  const double ux = std::cos(angle), uy = std::sin(angle);
  const double span = std::abs(ux) * spec.width + std::abs(uy) * spec.height;

  struct Grating {
    double fx, fy, phase, amp;
    Color tint;
  };
  std::vector<Grating> gratings;
  if (spec.generator == BaseGenerator::kTexture) {
    for (int k = 0; k < 3; ++k) {
      const double f = 0.04 + 0.21 * rng.uniform();
      const double th = std::numbers::pi * rng.uniform();
      gratings.push_back({f * std::cos(th), f * std::sin(th), 2 * std::numbers::pi * rng.uniform(),
                          20 + 30 * rng.uniform(),
                          {rng.uniform(), rng.uniform(), rng.uniform()}});
    }
  }

  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double t = ((x - spec.width / 2.0) * ux + (y - spec.height / 2.0) * uy) / span + 0.5;
      t = std::clamp(t, 0.0, 1.0);
      double px[3] = {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
      for (const auto& g : gratings) {
        const double v = g.amp * std::sin(2 * std::numbers::pi * (g.fx * x + g.fy * y) + g.phase);
        px[0] += v * g.tint.r;
        px[1] += v * g.tint.g;
        px[2] += v * g.tint.b;
      }
      for (int c = 0; c < 3; ++c) im.at(x, y, c) = static_cast<float>(std::clamp(px[c], 0.0, 255.0));
    }
  }
  paint_shapes(im, rng, spec.generator == BaseGenerator::kTexture ? 4 + static_cast<int>(rng.below(5))
                                                                  : 2 + static_cast<int>(rng.below(3)));
  return im;
}

}  // namespace

DatasetManifest synth_dataset(const SynthSpec& spec, std::uint64_t seed, const fs::path& out_dir) {
  if (spec.kinds.empty()) throw UsageError("synthetic spec needs at least one distortion kind");
  if (spec.levels.empty()) throw UsageError("synthetic spec has an empty level grid");
  if (spec.count < 1 || spec.width < 1 || spec.height < 1) {
    throw UsageError("synthetic spec needs positive count and image size");
  }
  for (double l : spec.levels) {
    if (!(l >= 0.0)) throw UsageError("distortion levels must be >= 0");
  }
  const double level_max = *std::max_element(spec.levels.begin(), spec.levels.end());

  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw DataError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.name = spec.name;
  manifest.scale = spec.scale;
  const std::size_t n_levels = spec.levels.size();
  const std::size_t n_kinds = spec.kinds.size();
  for (int i = 0; i < spec.count; ++i) {
    const double level = spec.levels[static_cast<std::size_t>(i) % n_levels];
    const DistortionKind kind = spec.kinds[(static_cast<std::size_t>(i) / n_levels) % n_kinds];

    Rng base_rng(derive_seed(seed, "base", static_cast<std::uint64_t>(i)));
    const RasterImage base = base_image(spec, base_rng);
    const RasterImage img = apply_distortion(
        base, kind, level, derive_seed(seed, "distort", static_cast<std::uint64_t>(i)),
        level_max > 0.0 ? level_max : 1.0);

    char id[32];
    std::snprintf(id, sizeof(id), "img%04d", i);
    const fs::path rel = fs::path("images") / (std::string(id) + ".png");
    write_png(img, out_dir / rel);

    double mos = spec.mos_for_level(level);
    if (spec.mos_jitter > 0.0) {
      Rng jitter(derive_seed(seed, "jitter", static_cast<std::uint64_t>(i)));
      mos += spec.mos_jitter * jitter.normal();
    }
    mos = std::clamp(mos, spec.scale.min, spec.scale.max);

    ImageRecord r;
    r.id = id;
    r.path = out_dir / rel;
    r.mos = mos;
    r.mos_std = spec.mos_std;
    r.ref_group = id;
    manifest.records.push_back(std::move(r));
  }
  manifest.validate();
  save_manifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

}  // namespace biqa
