// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>
#include <sstream>

#include "biqa/binary_io.hpp"
#include "biqa/error.hpp"
#include "biqa/pipeline.hpp"
#include "biqa/text.hpp"

namespace biqa {

namespace fs = std::filesystem;

fs::path split_dir(const fs::path& dir, int repeat) {
  char name[32];
  std::snprintf(name, sizeof name, "split_%02d", repeat);
  return dir / name;
}

void write_loss_curve(const fs::path& path, std::span<const double> curve) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "iteration,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) out << i << "," << format_double(curve[i]) << "\n";
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string() + " (did the previous stage run?)");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> all_ids(const SplitRepeat& rep) {
  std::vector<std::string> ids = rep.train;
  ids.insert(ids.end(), rep.val.begin(), rep.val.end());
  ids.insert(ids.end(), rep.test.begin(), rep.test.end());
  return ids;
}

void write_plan(const ExperimentContext& ctx, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream out(dir / "splits.tsv");
  if (!out) throw DataError("cannot write " + (dir / "splits.tsv").string());
  write_split_plan(ctx.plan, out);
}

FeatureTable load_table(const fs::path& path) { return load_precomputed(path).table(); }

int repeat_count(const ExperimentContext& ctx) { return static_cast<int>(ctx.plan.repeats.size()); }

}  // namespace

void finetune_stage(const ExperimentContext& ctx, const fs::path& dir) {
  const ExperimentConfig& cfg = ctx.config;
  if (!cfg.finetune) throw UsageError("finetune.enabled is false in this configuration");
  write_plan(ctx, dir);
  if (cfg.finetune_scope == FinetuneScope::kGlobal) {
    const TrainResult t = finetune_on(ctx, ctx.manifest.ids(), finetune_seed(cfg, std::nullopt));
    save_checkpoint(t.net, dir / "backbone_global.ckpt");
    write_loss_curve(dir / "loss_global.csv", t.loss_curve);
    return;
  }
  parallel_for(repeat_count(ctx), cfg.jobs, [&](int r) {
    const TrainResult t = finetune_on(ctx, ctx.plan.repeats[r].train, finetune_seed(cfg, r));
    fs::create_directories(split_dir(dir, r));
    save_checkpoint(t.net, split_dir(dir, r) / "backbone.ckpt");
    write_loss_curve(split_dir(dir, r) / "loss.csv", t.loss_curve);
  });
}

void extract_stage(const ExperimentContext& ctx, const fs::path& dir) {
  const ExperimentConfig& cfg = ctx.config;
  write_plan(ctx, dir);
  std::shared_ptr<const FeatureExtractor> shared;
  if (cfg.finetune && cfg.finetune_scope == FinetuneScope::kGlobal) {
    const fs::path p = dir / "backbone_global.ckpt";
    shared = std::make_shared<DeskExtractor>(load_checkpoint(p), "desk:" + sha256_file(p));
  } else if (!cfg.finetune) {
    shared = ctx.base_extractor();
  }
  parallel_for(repeat_count(ctx), cfg.jobs, [&](int r) {
    std::shared_ptr<const FeatureExtractor> extractor = shared;
    if (!extractor) {
      const fs::path p = split_dir(dir, r) / "backbone.ckpt";
      if (!fs::exists(p)) throw DataError("missing " + p.string() + " (run the finetune stage first)");
      extractor = std::make_shared<DeskExtractor>(load_checkpoint(p), "desk:" + sha256_file(p));
    }
    const FeatureTable table = extract_table(ctx, *extractor, all_ids(ctx.plan.repeats[r]));
    fs::create_directories(split_dir(dir, r));
    write_feature_file(split_dir(dir, r) / "features.biqf", extractor->feature_dim(), table);
  });
}

void train_svr_stage(const ExperimentContext& ctx, const fs::path& dir) {
  parallel_for(repeat_count(ctx), ctx.config.jobs, [&](int r) {
    const FeatureTable table = load_table(split_dir(dir, r) / "features.biqf");
    write_text(split_dir(dir, r) / "svr.json", split_models_to_json(fit_split(ctx, r, table)));
  });
}

EvalReport evaluate_stage(const ExperimentContext& ctx, const fs::path& dir) {
  std::vector<std::vector<SplitResult>> per_split(static_cast<std::size_t>(repeat_count(ctx)));
  parallel_for(repeat_count(ctx), ctx.config.jobs, [&](int r) {
    const FeatureTable table = load_table(split_dir(dir, r) / "features.biqf");
    const SplitModels models = split_models_from_json(read_text(split_dir(dir, r) / "svr.json"));
    per_split[r] = evaluate_fold(ctx, r, table, models);
  });
  EvalReport report = assemble_report(ctx, per_split);
  emit_report(report, dir);
  return report;
}

}  // namespace biqa
