// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include "biqa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include "biqa/binary_io.hpp"
#include "biqa/error.hpp"
#include "biqa/rng.hpp"
#include "biqa/text.hpp"
#include "svr_codec.hpp"

namespace biqa {

namespace fs = std::filesystem;

double score_image(const FusionConfig& fusion, const LinearSVRModel& svr,
                   std::span<const FeatureVector> crop_features, std::vector<double>* crop_scores) {
  if (static_cast<int>(crop_features.size()) < fusion.n_crops) {
    throw DataError("fusion " + fusion.label() + " needs " + std::to_string(fusion.n_crops) +
                    " crops, got " + std::to_string(crop_features.size()));
  }
  const auto used = crop_features.first(static_cast<std::size_t>(fusion.n_crops));
  switch (fusion.scheme) {
    case FusionScheme::kFeaturePool:
      return predict(svr, pool_features(used, *fusion.op));
    case FusionScheme::kFeatureConcat:
      return predict(svr, concat_features(used));
    case FusionScheme::kPredictionPool: {
      std::vector<double> scores = predict(svr, used);
      const double fused = pool_predictions(scores, *fusion.op);
      if (crop_scores) *crop_scores = std::move(scores);
      return fused;
    }
  }
  throw UsageError("unknown fusion scheme");
}

void append_training_rows(const FusionConfig& fusion, std::span<const FeatureVector> crop_features,
                          double target, std::vector<FeatureVector>& rows, std::vector<double>& targets) {
  if (static_cast<int>(crop_features.size()) < fusion.n_crops) {
    throw DataError("fusion " + fusion.label() + " needs " + std::to_string(fusion.n_crops) + " crops");
  }
  const auto used = crop_features.first(static_cast<std::size_t>(fusion.n_crops));
  switch (fusion.scheme) {
    case FusionScheme::kFeaturePool:
      rows.push_back(pool_features(used, *fusion.op));
      targets.push_back(target);
      return;
    case FusionScheme::kFeatureConcat:
      rows.push_back(concat_features(used));
      targets.push_back(target);
      return;
    case FusionScheme::kPredictionPool:
      for (const auto& f : used) {
        rows.push_back(f);
        targets.push_back(target);
      }
      return;
  }
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------

int ExperimentContext::crops_per_image() const {
  if (config.preprocess.mode == CropMode::kCentralCrop) return 1;
  return std::max(config.max_crops(), config.finetune ? config.finetune_crops() : 0);
}

std::shared_ptr<const FeatureExtractor> ExperimentContext::base_extractor() const {
  if (precomputed) return precomputed;
  return std::make_shared<DeskExtractor>(*base_net, base_tag);
}

namespace {

std::string desk_tag(const DeskCnn& net) { return "desk:" + sha256_hex(serialize_checkpoint(net)); }

}  // namespace

ExperimentContext prepare_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentContext ctx;
  ctx.config = config;
  ctx.manifest = load_manifest(config.manifest);
  ctx.manifest.validate();
  ctx.plan = make_splits(ctx.manifest, config.protocol, config.seed, config.repeat_count());

  if (config.backbone == BackboneKind::kPrecomputed) {
    ctx.precomputed = std::make_shared<PrecomputedFeatures>(load_precomputed(config.features_path));
    ctx.base_tag = ctx.precomputed->source_tag();
    return ctx;
  }

  if (!config.checkpoint_path.empty()) {
    DeskCnn net = load_checkpoint(config.checkpoint_path);
    if (net.arch().input_size != config.arch.input_size || net.arch().feature_dim != config.arch.feature_dim) {
      throw DataError("checkpoint " + config.checkpoint_path.string() +
                      " does not match backbone.input_size / backbone.feature_dim");
    }
    ctx.base_net = std::move(net);
  } else {
    ctx.base_net = DeskCnn::initialized(config.arch, derive_seed(config.seed, "backbone-init"));
  }
  ctx.base_tag = desk_tag(*ctx.base_net);

  const int size = config.arch.input_size;
  const int k = ctx.crops_per_image();
  const auto& records = ctx.manifest.records;
  std::vector<std::vector<Crop>> crops(records.size());
  parallel_for(static_cast<int>(records.size()), config.jobs, [&](int i) {
    const ImageRecord& rec = records[i];
    const RasterImage image = read_image(rec.path);
    if (config.preprocess.mode == CropMode::kCentralCrop) {
      crops[i].push_back(center_crop(resize_shorter_side(image, config.preprocess.resize_target(size)), size));
      return;
    }
    if (image.width < size || image.height < size) {
      throw DataError("image '" + rec.id + "' (" + std::to_string(image.width) + "x" +
                      std::to_string(image.height) + ") is smaller than the " + std::to_string(size) +
                      "-pixel crop");
    }
    crops[i] = random_crops(image, k, size, derive_seed(config.seed, "crops", rec.id)).crops;
  });
  for (std::size_t i = 0; i < records.size(); ++i) ctx.crops.emplace(records[i].id, std::move(crops[i]));
  return ctx;
}

std::uint64_t finetune_seed(const ExperimentConfig& config, std::optional<int> repeat) {
  if (!repeat) return derive_seed(config.seed, "finetune-global");
  return derive_seed(config.seed, "finetune", static_cast<std::uint64_t>(*repeat));
}

TrainResult finetune_on(const ExperimentContext& ctx, std::span<const std::string> ids, std::uint64_t seed) {
  if (!ctx.base_net) throw UsageError("fine-tuning requires the desk backbone");
  const ClassWeights weights = class_weights(ctx.manifest, ids);
  const int k = ctx.config.preprocess.mode == CropMode::kCentralCrop ? 1 : ctx.config.finetune_crops();
  std::vector<TrainingSample> samples;
  samples.reserve(ids.size() * static_cast<std::size_t>(k));
  for (const auto& id : ids) {
    const QualityClass label = partition_mos(ctx.manifest.at(id).mos, ctx.manifest.scale);
    const auto& crops = ctx.crops.at(id);
    for (int c = 0; c < k; ++c) samples.push_back({crops[c], label, weights.at(label)});
  }
  TrainConfig train = ctx.config.train;
  train.seed = seed;
  return finetune(*ctx.base_net, samples, train);
}

FeatureTable extract_table(const ExperimentContext& ctx, const FeatureExtractor& extractor,
                           std::span<const std::string> ids) {
  const int k = ctx.crops_per_image();
  FeatureTable table;
  for (const auto& id : ids) {
    if (extractor.input_size() == 0) {
      for (int c = 0; c < k; ++c) {
        CropKey key{id, c};
        table.emplace(key, extractor.extract(Crop{}, key));
      }
      continue;
    }
    const auto it = ctx.crops.find(id);
    if (it == ctx.crops.end()) throw DataError("no crops prepared for image '" + id + "'");
    for (int c = 0; c < k; ++c) {
      CropKey key{id, c};
      table.emplace(key, extractor.extract(it->second[c], key));
    }
  }
  return table;
}

std::vector<FeatureVector> image_features(const FeatureTable& table, const std::string& id, int n_crops) {
  std::vector<FeatureVector> out;
  out.reserve(static_cast<std::size_t>(n_crops));
  for (int c = 0; c < n_crops; ++c) {
    const auto it = table.find(CropKey{id, c});
    if (it == table.end()) {
      throw DataError("missing features for image '" + id + "' crop " + std::to_string(c));
    }
    out.push_back(it->second);
  }
  return out;
}

namespace {

std::vector<std::string> split_ids(const SplitRepeat& rep) {
  std::vector<std::string> ids = rep.train;
  ids.insert(ids.end(), rep.val.begin(), rep.val.end());
  ids.insert(ids.end(), rep.test.begin(), rep.test.end());
  return ids;
}

struct Rows {
  std::vector<FeatureVector> x;
  std::vector<double> y;
};

Rows training_rows(const ExperimentContext& ctx, const FusionConfig& fusion, const FeatureTable& table,
                   std::span<const std::string> ids) {
  Rows rows;
  for (const auto& id : ids) {
    append_training_rows(fusion, image_features(table, id, fusion.n_crops), ctx.manifest.at(id).mos, rows.x,
                         rows.y);
  }
  return rows;
}

std::vector<double> score_ids(const FusionConfig& fusion, const LinearSVRModel& svr, const FeatureTable& table,
                              std::span<const std::string> ids) {
  std::vector<double> out;
  for (const auto& id : ids) out.push_back(score_image(fusion, svr, image_features(table, id, fusion.n_crops)));
  return out;
}

// Lower median, so the pick stays on the grid.
double lower_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

}  // namespace

SplitModels fit_split(const ExperimentContext& ctx, int repeat, const FeatureTable& table) {
  const SplitRepeat& rep = ctx.plan.repeats.at(static_cast<std::size_t>(repeat));
  if (rep.train.empty()) throw DataError("split " + std::to_string(repeat) + " has an empty training fold");
  SplitModels out;
  for (const auto& fusion : ctx.config.fusions) {
    const std::string label = fusion.label();
    const Rows rows = training_rows(ctx, fusion, table, rep.train);
    SVRConfig svr = ctx.config.svr;
    svr.seed = derive_seed(ctx.config.seed, "svr", static_cast<std::uint64_t>(repeat));
    if (ctx.config.protocol == Protocol::kLegacy && rep.val.size() >= 2) {
      std::vector<double> truth;
      for (const auto& id : rep.val) truth.push_back(ctx.manifest.at(id).mos);
      double best_c = svr.C;
      double best_lcc = -std::numeric_limits<double>::infinity();
      for (double c : ctx.config.c_grid) {
        SVRConfig trial = svr;
        trial.C = c;
        const LinearSVRModel m = train_svr(rows.x, rows.y, trial);
        const auto lcc = pearson_lcc(score_ids(fusion, m, table, rep.val), truth);
        if (lcc && *lcc > best_lcc) {
          best_lcc = *lcc;
          best_c = c;
        }
      }
      svr.C = best_c;
      out.selected_c[label] = best_c;
    }
    out.models[label] = train_svr(rows.x, rows.y, svr);
  }
  return out;
}

std::vector<SplitResult> evaluate_fold(const ExperimentContext& ctx, int repeat, const FeatureTable& table,
                                       const SplitModels& models) {
  const SplitRepeat& rep = ctx.plan.repeats.at(static_cast<std::size_t>(repeat));
  const std::set<std::string> test(rep.test.begin(), rep.test.end());
  std::vector<const ImageRecord*> records;
  bool any_std = false;
  for (const auto& r : ctx.manifest.records) {
    if (!test.count(r.id)) continue;
    records.push_back(&r);
    any_std = any_std || r.mos_std.has_value();
  }
  if (records.empty()) throw DataError("split " + std::to_string(repeat) + " has an empty test fold");

  std::vector<SplitResult> out;
  for (const auto& fusion : ctx.config.fusions) {
    const std::string label = fusion.label();
    const auto it = models.models.find(label);
    if (it == models.models.end()) {
      throw DataError("split " + std::to_string(repeat) + " has no regressor for " + label);
    }
    SplitResult result;
    result.repeat = repeat;
    if (auto c = models.selected_c.find(label); c != models.selected_c.end()) result.selected_c = c->second;
    ScorePairs pairs;
    if (any_std) pairs.truth_std.emplace();
    for (const ImageRecord* r : records) {
      double score = score_image(fusion, it->second, image_features(table, r->id, fusion.n_crops));
      if (ctx.config.clip_predictions) score = std::clamp(score, ctx.manifest.scale.min, ctx.manifest.scale.max);
      if (!std::isfinite(score)) {
        throw NumericError("split " + std::to_string(repeat) + ": non-finite prediction for '" + r->id + "'");
      }
      result.predictions.push_back({r->id, r->mos, r->mos_std, score});
      pairs.predicted.push_back(score);
      pairs.truth.push_back(r->mos);
      if (any_std) pairs.truth_std->push_back(r->mos_std.value_or(0.0));
    }
    if (records.size() >= 2) {
      result.metrics = evaluate_split(pairs, ctx.manifest.scale);
    } else {
      // A single test image has no correlation; error statistics still apply.
      const ErrorStats e = error_stats(pairs, ctx.manifest.scale);
      result.metrics.rmse_pct = e.rmse_pct;
      result.metrics.mae_pct = e.mae_pct;
      if (pairs.truth_std && pairs.truth_std->front() > 0.0) {
        result.metrics.sigma_coverage = sigma_coverage(pairs).fractions;
      }
    }
    out.push_back(std::move(result));
  }
  return out;
}

EvalReport assemble_report(const ExperimentContext& ctx, const std::vector<std::vector<SplitResult>>& per_split) {
  EvalReport report;
  report.config = ctx.config.echo();
  report.dataset = ctx.manifest.name;
  report.image_count = static_cast<int>(ctx.manifest.records.size());
  for (std::size_t f = 0; f < ctx.config.fusions.size(); ++f) {
    ConfigResult c;
    c.fusion = ctx.config.fusions[f];
    for (const auto& split : per_split) c.splits.push_back(split.at(f));
    report.configs.push_back(std::move(c));
  }
  aggregate(report, ctx.config.alpha);
  return report;
}

namespace {

std::string with_split(int repeat, const std::string& what) {
  return "split " + std::to_string(repeat) + ": " + what;
}

}  // namespace

EvalReport run_experiment(const ExperimentContext& ctx, RunArtifacts* artifacts) {
  const ExperimentConfig& cfg = ctx.config;
  const int repeats = static_cast<int>(ctx.plan.repeats.size());
  const std::vector<std::string> all_ids = ctx.manifest.ids();

  std::shared_ptr<const FeatureExtractor> global;
  std::optional<TrainResult> global_train;
  if (cfg.finetune && cfg.finetune_scope == FinetuneScope::kGlobal) {
    global_train = finetune_on(ctx, all_ids, finetune_seed(cfg, std::nullopt));
    global = std::make_shared<DeskExtractor>(global_train->net, desk_tag(global_train->net));
  }

  std::vector<std::vector<SplitResult>> per_split(static_cast<std::size_t>(repeats));
  std::vector<std::vector<double>> losses(static_cast<std::size_t>(repeats));
  parallel_for(repeats, cfg.jobs, [&](int r) {
    try {
      const SplitRepeat& rep = ctx.plan.repeats[r];
      std::shared_ptr<const FeatureExtractor> extractor;
      if (cfg.finetune && cfg.finetune_scope == FinetuneScope::kPerSplit) {
        TrainResult t = finetune_on(ctx, rep.train, finetune_seed(cfg, r));
        losses[r] = std::move(t.loss_curve);
        const std::string tag = desk_tag(t.net);
        extractor = std::make_shared<DeskExtractor>(std::move(t.net), tag);
      } else {
        extractor = global ? global : ctx.base_extractor();
      }
      const FeatureTable table = extract_table(ctx, *extractor, split_ids(rep));
      const SplitModels models = fit_split(ctx, r, table);
      per_split[r] = evaluate_fold(ctx, r, table, models);
    } catch (const NumericError& e) {
      throw NumericError(with_split(r, e.what()));
    }
  });
  EvalReport report = assemble_report(ctx, per_split);

  if (artifacts) {
    if (global_train) artifacts->loss_curves = {global_train->loss_curve};
    else if (cfg.finetune) artifacts->loss_curves = losses;
    if (cfg.final_model) {
      const FusionConfig fusion = FusionConfig::parse(report.winner);
      std::shared_ptr<const FeatureExtractor> extractor;
      QualityModel model;
      model.preprocess = cfg.preprocess;
      model.fusion = fusion;
      model.scale = ctx.manifest.scale;
      model.clip_predictions = cfg.clip_predictions;
      if (cfg.backbone == BackboneKind::kDesk) {
        DeskCnn net = *ctx.base_net;
        if (global_train) net = global_train->net;
        else if (cfg.finetune) net = finetune_on(ctx, all_ids, derive_seed(cfg.seed, "finetune-final")).net;
        model.backbone = {BackboneKind::kDesk, sha256_hex(serialize_checkpoint(net)), "model_backbone.ckpt",
                          net.arch().input_size};
        extractor = std::make_shared<DeskExtractor>(net, "desk:" + model.backbone.source_tag);
        artifacts->final_net = std::move(net);
      } else {
        model.backbone = {BackboneKind::kPrecomputed, ctx.precomputed->source_tag(),
                          fs::absolute(cfg.features_path), 0};
        extractor = ctx.precomputed;
      }
      const FeatureTable table = extract_table(ctx, *extractor, all_ids);
      const Rows rows = training_rows(ctx, fusion, table, all_ids);
      SVRConfig svr = cfg.svr;
      svr.seed = derive_seed(cfg.seed, "svr-final");
      if (cfg.protocol == Protocol::kLegacy) {
        std::vector<double> picks;
        for (const auto& s : report.find(report.winner).splits) {
          if (s.selected_c) picks.push_back(*s.selected_c);
        }
        if (!picks.empty()) svr.C = lower_median(picks);
      }
      model.svr = train_svr(rows.x, rows.y, svr);
      artifacts->final_model = std::move(model);
    }
  }
  return report;
}

EvalReport run_experiment(const ExperimentConfig& config, RunArtifacts* artifacts) {
  return run_experiment(prepare_experiment(config), artifacts);
}

void write_run_outputs(const EvalReport& report, const RunArtifacts& artifacts, const ExperimentConfig& config,
                       const fs::path& dir) {
  emit_report(report, dir);
  for (std::size_t r = 0; r < artifacts.loss_curves.size(); ++r) {
    const bool global = config.finetune_scope == FinetuneScope::kGlobal;
    write_loss_curve(global ? dir / "loss_global.csv" : split_dir(dir, static_cast<int>(r)) / "loss.csv",
                     artifacts.loss_curves[r]);
  }
  if (artifacts.final_model) {
    QualityModel model = *artifacts.final_model;
    if (artifacts.final_net) {
      const std::string hash = save_checkpoint(*artifacts.final_net, dir / model.backbone.location);
      if (hash != model.backbone.source_tag) throw DataError("checkpoint hash changed while saving");
    } else if (model.backbone.location.is_absolute()) {
      model.backbone.location = fs::proximate(model.backbone.location, fs::absolute(dir));
    }
    save_model(model, dir / "model.biqm");
  }
}

// ---------------------------------------------------------------------------

std::string split_models_to_json(const SplitModels& models) {
  detail::Json j;
  detail::Json m = detail::Json::object();
  for (const auto& [label, svr] : models.models) m[label] = detail::svr_to_json(svr);
  j["models"] = m;
  detail::Json c = detail::Json::object();
  for (const auto& [label, v] : models.selected_c) c[label] = v;
  j["selected_c"] = c;
  return j.dump(2) + "\n";
}

SplitModels split_models_from_json(std::string_view json) {
  SplitModels out;
  try {
    const auto j = detail::Json::parse(json);
    for (const auto& [label, v] : j.at("models").items()) out.models[label] = detail::svr_from_json(v);
    for (const auto& [label, v] : j.at("selected_c").items()) out.selected_c[label] = v.get<double>();
  } catch (const detail::Json::exception& e) {
    throw DataError(std::string("malformed regressor file: ") + e.what());
  }
  return out;
}

}  // namespace biqa
