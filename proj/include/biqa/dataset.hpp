// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace biqa {

struct ScaleBounds {
  double min = 0.0;
  double max = 100.0;

  double width() const { return max - min; }
  bool contains(double v) const { return v >= min && v <= max; }
  bool operator==(const ScaleBounds&) const = default;
};

struct ImageRecord {
  std::string id;
  std::filesystem::path path;  // resolved against the manifest directory
  double mos = 0.0;
  std::optional<double> mos_std;
  std::optional<std::string> ref_group;

  bool operator==(const ImageRecord&) const = default;
};

struct DatasetManifest {
  std::string name;
  ScaleBounds scale;
  std::vector<ImageRecord> records;

  // Throws DataError on duplicate ids, out-of-range MOS, negative std or
  // an empty scale.
  void validate() const;

  const ImageRecord& at(std::string_view id) const;
  std::vector<std::string> ids() const;
};

// Reads a manifest file. Leading "# key: value" lines may declare `name`,
// `scale_min` and `scale_max`; `scale_override` wins over them. Columns are
// comma- or tab-separated: id, path, mos[, mos_std[, ref_group]].
DatasetManifest load_manifest(const std::filesystem::path& path,
                              std::optional<ScaleBounds> scale_override = std::nullopt);

// Writes the same format. Paths are written relative to `path`'s directory
// when possible.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Five-level quality classes.

enum class QualityClass : int { kBad = 0, kPoor = 1, kFair = 2, kGood = 3, kExcellent = 4 };

inline constexpr int kNumQualityClasses = 5;
inline constexpr std::array<QualityClass, kNumQualityClasses> kAllQualityClasses = {
    QualityClass::kBad, QualityClass::kPoor, QualityClass::kFair, QualityClass::kGood,
    QualityClass::kExcellent};

std::string_view to_string(QualityClass c);

// Rescales `mos` from `scale` onto [0, 100] and applies the brackets
// [0,20] ]20,40] ]40,60] ]60,80] ]80,100].
QualityClass partition_mos(double mos, const ScaleBounds& scale);

using ClassWeights = std::map<QualityClass, double>;

// weight(c) = count(most frequent class) / count(c). Classes with no members
// are left out of the map.
ClassWeights class_weights(std::span<const QualityClass> labels);
ClassWeights class_weights(const DatasetManifest& manifest);
ClassWeights class_weights(const DatasetManifest& manifest, std::span<const std::string> ids);

// ---------------------------------------------------------------------------
// Split protocols.

enum class Protocol { kChallenge, kLegacy };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view text);

struct SplitRepeat {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  bool operator==(const SplitRepeat&) const = default;
};

struct SplitPlan {
  Protocol protocol = Protocol::kChallenge;
  std::uint64_t seed = 0;
  std::vector<SplitRepeat> repeats;

  bool operator==(const SplitPlan&) const = default;
};

inline constexpr int kChallengeRepeats = 10;
inline constexpr int kLegacyRepeats = 100;

// Challenge: uniform random 80/20 image split, |train| = round(0.8 N).
// Legacy: reference groups shuffled, floor(0.6 G) to train, half of the rest
// (rounded down) to val, the remainder to test. `repeats` defaults to 10 or
// 100 by protocol.
SplitPlan make_splits(const DatasetManifest& manifest, Protocol protocol, std::uint64_t seed,
                      std::optional<int> repeats = std::nullopt);

// Tab-separated text: "#key value" header lines, then "repeat fold id" rows.
void write_split_plan(const SplitPlan& plan, std::ostream& out);
SplitPlan read_split_plan(std::istream& in);

// ---------------------------------------------------------------------------
// Synthetic dataset generation.

enum class DistortionKind { kGaussianBlur, kGaussianNoise, kBlockQuantize };

std::string_view to_string(DistortionKind k);
DistortionKind parse_distortion_kind(std::string_view text);

enum class BaseGenerator { kTexture, kGradient };

struct SynthSpec {
  std::string name = "synthetic";
  int count = 200;
  int width = 64;
  int height = 64;
  std::vector<DistortionKind> kinds = {DistortionKind::kGaussianBlur};
  std::vector<double> levels = {0, 1, 2, 3, 4};
  BaseGenerator generator = BaseGenerator::kTexture;
  // Ground truth: mos(level) = mos_intercept - mos_slope * level.
  double mos_intercept = 100.0;
  double mos_slope = 20.0;
  double mos_std = 5.0;
  // Standard deviation of Gaussian noise added to each image's MOS (then
  // clamped to the scale). Zero keeps MOS noiseless.
  double mos_jitter = 0.0;
  ScaleBounds scale{0.0, 100.0};

  double mos_for_level(double level) const { return mos_intercept - mos_slope * level; }
};

// Writes `out_dir`/images/*.png and `out_dir`/manifest.csv. Image i gets
// level levels[i % L] and kind kinds[(i / L) % K].
DatasetManifest synth_dataset(const SynthSpec& spec, std::uint64_t seed,
                              const std::filesystem::path& out_dir);

}  // namespace biqa
