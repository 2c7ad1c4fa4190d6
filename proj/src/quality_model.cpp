// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include "biqa/quality_model.hpp"

#include <algorithm>

#include "biqa/binary_io.hpp"
#include "biqa/error.hpp"
#include "biqa/pipeline.hpp"
#include "svr_codec.hpp"

namespace biqa {

namespace fs = std::filesystem;
using detail::Json;

namespace {

constexpr std::string_view kModelMagic = "BIQM";
// magic + version + payload size, and the CRC trailer.
constexpr std::size_t kHeaderSize = 16;
constexpr std::size_t kTrailerSize = 4;

Json model_json(const QualityModel& m) {
  Json j;
  j["backbone"] = {{"kind", std::string(to_string(m.backbone.kind))},
                   {"source_tag", m.backbone.source_tag},
                   {"location", m.backbone.location.generic_string()},
                   {"input_size", m.backbone.input_size}};
  j["preprocess"] = {{"mode", std::string(to_string(m.preprocess.mode))},
                     {"central_resize", m.preprocess.central_resize}};
  j["fusion"] = m.fusion.label();
  j["svr"] = detail::svr_to_json(m.svr);
  j["scale"] = {m.scale.min, m.scale.max};
  j["clip_predictions"] = m.clip_predictions;
  return j;
}

QualityModel model_from_json(const Json& j, std::uint32_t version) {
  QualityModel m;
  m.format_version = version;
  try {
    const auto& b = j.at("backbone");
    const auto kind = b.at("kind").get<std::string>();
    if (kind == "desk") m.backbone.kind = BackboneKind::kDesk;
    else if (kind == "precomputed") m.backbone.kind = BackboneKind::kPrecomputed;
    else throw DataError("unknown backbone kind '" + kind + "'");
    m.backbone.source_tag = b.at("source_tag").get<std::string>();
    m.backbone.location = b.at("location").get<std::string>();
    m.backbone.input_size = b.at("input_size").get<int>();
    const auto& p = j.at("preprocess");
    const auto mode = p.at("mode").get<std::string>();
    if (mode == "central-crop") m.preprocess.mode = CropMode::kCentralCrop;
    else if (mode == "random-crops") m.preprocess.mode = CropMode::kRandomCrops;
    else throw DataError("unknown preprocessing mode '" + mode + "'");
    m.preprocess.central_resize = p.at("central_resize").get<int>();
    m.fusion = FusionConfig::parse(j.at("fusion").get<std::string>());
    m.svr = detail::svr_from_json(j.at("svr"));
    m.scale = {j.at("scale").at(0).get<double>(), j.at("scale").at(1).get<double>()};
    m.clip_predictions = j.at("clip_predictions").get<bool>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed model payload: ") + e.what());
  }
  return m;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const QualityModel& model) {
  const std::vector<std::uint8_t> payload = Json::to_cbor(model_json(model));
  ByteWriter out;
  out.raw(kModelMagic);
  out.u32(model.format_version);
  out.u64(payload.size());
  out.raw(std::string_view(reinterpret_cast<const char*>(payload.data()), payload.size()));
  const auto& bytes = out.bytes();
  out.u32(crc32_of(bytes.data(), bytes.size()));
  return out.take();
}

QualityModel deserialize_model(const std::vector<std::uint8_t>& bytes, const std::string& context) {
  if (bytes.size() < kHeaderSize + kTrailerSize ||
      std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != kModelMagic) {
    if (bytes.size() >= 4 &&
        std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) == kModelMagic) {
      throw DataError(context + ": checksum mismatch (truncated model file)");
    }
    throw DataError(context + ": not a quality model file");
  }
  const std::size_t body = bytes.size() - kTrailerSize;
  ByteReader trailer(bytes.data() + body, kTrailerSize, context);
  if (trailer.u32() != crc32_of(bytes.data(), body)) {
    throw DataError(context + ": checksum mismatch (corrupted or truncated model file)");
  }
  ByteReader in(bytes.data(), body, context);
  in.raw(4);
  const std::uint32_t version = in.u32();
  if (version != kModelFormatVersion) {
    throw DataError(context + ": unsupported model format version " + std::to_string(version) +
                    " (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  const std::uint64_t size = in.u64();
  if (size != in.remaining()) throw DataError(context + ": payload size does not match the file");
  Json j;
  try {
    j = Json::from_cbor(bytes.begin() + kHeaderSize, bytes.begin() + static_cast<std::ptrdiff_t>(body));
  } catch (const Json::exception& e) {
    throw DataError(context + ": undecodable model payload: " + e.what());
  }
  return model_from_json(j, version);
}

void save_model(const QualityModel& model, const fs::path& path) {
  write_file_bytes(path, serialize_model(model));
}

QualityModel load_model(const fs::path& path) {
  return deserialize_model(read_file_bytes(path), path.string());
}

ResolvedModel resolve_model(const QualityModel& model, const fs::path& model_dir, const ResolveOptions& options) {
  ResolvedModel r;
  r.model = model;
  const fs::path location =
      model.backbone.location.is_absolute() ? model.backbone.location : model_dir / model.backbone.location;
  if (model.backbone.location.empty() || !fs::exists(location)) {
    throw DataError("cannot resolve backbone: " + location.string() + " does not exist");
  }
  if (model.backbone.kind == BackboneKind::kDesk) {
    const std::string hash = sha256_file(location);
    if (hash != model.backbone.source_tag) {
      const std::string msg = "backbone checkpoint " + location.string() + " has hash " + hash +
                              " but the model was trained with " + model.backbone.source_tag;
      if (!options.allow_hash_mismatch) throw DataError(msg);
      r.warnings.push_back(msg);
    }
    DeskCnn net = load_checkpoint(location);
    if (net.arch().input_size != model.backbone.input_size) {
      throw DataError("backbone mismatch: checkpoint " + location.string() + " does not fit the regressor");
    }
    r.extractor = std::make_shared<DeskExtractor>(std::move(net), "desk:" + hash);
  } else {
    auto features = std::make_shared<PrecomputedFeatures>(load_precomputed(location));
    if (features->source_tag() != model.backbone.source_tag) {
      const std::string msg = "feature file " + location.string() + " has tag " + features->source_tag() +
                              " but the model was trained with " + model.backbone.source_tag;
      if (!options.allow_hash_mismatch) throw DataError(msg);
      r.warnings.push_back(msg);
    }
    r.extractor = std::move(features);
  }
  if (model.fusion.scheme == FusionScheme::kFeatureConcat) {
    if (r.extractor->feature_dim() * model.fusion.n_crops != model.svr.feature_dim) {
      throw DataError("backbone mismatch: feature dimension does not fit the regressor");
    }
  } else if (r.extractor->feature_dim() != model.svr.feature_dim) {
    throw DataError("backbone mismatch: feature dimension does not fit the regressor");
  }
  return r;
}

ResolvedModel open_model(const fs::path& path, const ResolveOptions& options) {
  return resolve_model(load_model(path), path.parent_path(), options);
}

ImagePrediction predict_raster(const ResolvedModel& resolved, const RasterImage& image,
                               const std::string& image_id, std::optional<int> n_crops, std::uint64_t seed) {
  const QualityModel& m = resolved.model;
  const FeatureExtractor& ex = *resolved.extractor;
  int n = n_crops.value_or(m.fusion.n_crops);
  if (n < 1) throw UsageError("crop count must be >= 1");
  if (m.preprocess.mode == CropMode::kCentralCrop) n = 1;
  if (m.fusion.scheme == FusionScheme::kFeatureConcat && n != m.fusion.n_crops) {
    throw UsageError("a concatenation model needs exactly " + std::to_string(m.fusion.n_crops) + " crops");
  }
  FusionConfig fusion = m.fusion;
  fusion.n_crops = n;

  ImagePrediction out;
  std::vector<FeatureVector> features;
  if (ex.input_size() == 0) {
    for (int c = 0; c < n; ++c) features.push_back(ex.extract(Crop{}, CropKey{image_id, c}));
  } else {
    const int size = ex.input_size();
    std::vector<Crop> crops;
    if (m.preprocess.mode == CropMode::kCentralCrop) {
      crops.push_back(center_crop(resize_shorter_side(image, m.preprocess.resize_target(size)), size));
    } else {
      if (image.width < size || image.height < size) {
        throw DataError("image '" + image_id + "' (" + std::to_string(image.width) + "x" +
                        std::to_string(image.height) + ") is smaller than the " + std::to_string(size) +
                        "-pixel crop");
      }
      CropSample sample = random_crops(image, n, size, seed);
      out.with_replacement = sample.with_replacement;
      crops = std::move(sample.crops);
    }
    for (int c = 0; c < n; ++c) {
      out.crop_origins.push_back({crops[c].x, crops[c].y});
      features.push_back(ex.extract(crops[c], CropKey{image_id, c}));
    }
  }
  out.score = score_image(fusion, m.svr, features,
                          fusion.scheme == FusionScheme::kPredictionPool ? &out.crop_scores : nullptr);
  if (m.clip_predictions) {
    out.score = std::clamp(out.score, m.scale.min, m.scale.max);
  }
  return out;
}

ImagePrediction predict_image(const ResolvedModel& resolved, const fs::path& image, std::optional<int> n_crops,
                              std::uint64_t seed) {
  const std::string id = image.stem().string();
  if (resolved.extractor->input_size() == 0) {
    return predict_raster(resolved, RasterImage{}, id, n_crops, seed);
  }
  return predict_raster(resolved, read_image(image), id, n_crops, seed);
}

}  // namespace biqa
