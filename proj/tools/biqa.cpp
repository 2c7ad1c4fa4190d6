// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: dataset synthesis, the staged experiment commands,
// full runs, single-image prediction and report rendering.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "biqa/config.hpp"
#include "biqa/dataset.hpp"
#include "biqa/error.hpp"
#include "biqa/pipeline.hpp"
#include "biqa/quality_model.hpp"
#include "biqa/report.hpp"
#include "biqa/text.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "table";
  std::optional<int> jobs;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_format) {
  cmd->add_option("--config", o.config, "Experiment config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Override experiment.seed");
  cmd->add_option("--out", o.out, "Output directory (overrides experiment.output)");
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  if (with_format) {
    cmd->add_option("--format", o.format, "Stdout format")->check(CLI::IsMember({"table", "json-like"}));
  }
}

biqa::ExperimentConfig load(const CommonOptions& o) {
  biqa::ExperimentConfig cfg = biqa::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.jobs) cfg.jobs = *o.jobs;
  return cfg;
}

void print_report(const biqa::EvalReport& report, const std::string& format) {
  if (biqa::parse_report_format(format) == biqa::ReportFormat::kJson) {
    std::cout << biqa::render_json(report);
  } else {
    std::cout << biqa::render_table(report);
  }
}

std::vector<biqa::DistortionKind> parse_kinds(const std::vector<std::string>& names) {
  std::vector<biqa::DistortionKind> kinds;
  for (const auto& n : names) kinds.push_back(biqa::parse_distortion_kind(n));
  return kinds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"No-reference image quality assessment toolkit"};
  app.require_subcommand(1);

  // synth
  biqa::SynthSpec spec;
  std::string synth_out;
  std::uint64_t synth_seed = 1;
  std::vector<std::string> kind_names = {"blur"};
  std::string generator = "texture";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic distorted-image dataset");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--name", spec.name, "Dataset name");
  synth->add_option("--count", spec.count, "Number of images")->check(CLI::PositiveNumber);
  synth->add_option("--width", spec.width, "Image width")->check(CLI::PositiveNumber);
  synth->add_option("--height", spec.height, "Image height")->check(CLI::PositiveNumber);
  synth->add_option("--kinds", kind_names, "Distortions: blur, noise, block")->delimiter(',');
  synth->add_option("--levels", spec.levels, "Distortion levels")->delimiter(',');
  synth->add_option("--generator", generator, "Base image generator")
      ->check(CLI::IsMember({"texture", "gradient"}));
  synth->add_option("--mos-intercept", spec.mos_intercept, "MOS at level 0");
  synth->add_option("--mos-slope", spec.mos_slope, "MOS drop per level");
  synth->add_option("--mos-std", spec.mos_std, "Recorded per-image score std");
  synth->add_option("--mos-jitter", spec.mos_jitter, "Std of noise added to each MOS");

  // experiment stages
  CommonOptions run_o, ft_o, ex_o, svr_o, ev_o;
  auto* run = app.add_subcommand("run", "Run a whole experiment and write the report and model");
  add_common(run, run_o, true);
  auto* ft = app.add_subcommand("finetune", "Fine-tune the backbone for every split");
  add_common(ft, ft_o, false);
  auto* ex = app.add_subcommand("extract", "Extract per-crop features for every split");
  add_common(ex, ex_o, false);
  auto* tr = app.add_subcommand("train-svr", "Train the regressors for every split and fusion");
  add_common(tr, svr_o, false);
  auto* ev = app.add_subcommand("evaluate", "Evaluate trained regressors and write the report");
  add_common(ev, ev_o, true);

  // predict
  std::string model_path, image_path, predict_format = "table";
  std::optional<int> predict_crops;
  std::uint64_t predict_seed = 1;
  bool allow_mismatch = false;
  auto* pred = app.add_subcommand("predict", "Score one image with a saved quality model");
  pred->add_option("--model", model_path, "Quality model file")->required()->check(CLI::ExistingFile);
  pred->add_option("image", image_path, "Image file (PNG or BMP)")->required();
  pred->add_option("--crops", predict_crops, "Number of crops (default: the model's)")
      ->check(CLI::PositiveNumber);
  pred->add_option("--seed", predict_seed, "Crop sampling seed");
  pred->add_option("--format", predict_format, "Output format")->check(CLI::IsMember({"table", "json-like"}));
  pred->add_flag("--allow-hash-mismatch", allow_mismatch, "Accept a backbone whose hash changed");

  // report
  std::string report_in, report_format = "table";
  auto* rep = app.add_subcommand("report", "Render a saved report");
  rep->add_option("--in", report_in, "report.json")->required()->check(CLI::ExistingFile);
  rep->add_option("--format", report_format, "Output format")->check(CLI::IsMember({"table", "json-like"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      spec.kinds = parse_kinds(kind_names);
      spec.generator = generator == "gradient" ? biqa::BaseGenerator::kGradient : biqa::BaseGenerator::kTexture;
      const auto manifest = biqa::synth_dataset(spec, synth_seed, synth_out);
      std::cerr << "wrote " << manifest.records.size() << " images to " << synth_out << "\n";
    } else if (*run) {
      const auto cfg = load(run_o);
      biqa::RunArtifacts artifacts;
      const auto report = biqa::run_experiment(cfg, &artifacts);
      biqa::write_run_outputs(report, artifacts, cfg, cfg.output_dir);
      print_report(report, run_o.format);
    } else if (*ft) {
      const auto cfg = load(ft_o);
      biqa::finetune_stage(biqa::prepare_experiment(cfg), cfg.output_dir);
    } else if (*ex) {
      const auto cfg = load(ex_o);
      biqa::extract_stage(biqa::prepare_experiment(cfg), cfg.output_dir);
    } else if (*tr) {
      const auto cfg = load(svr_o);
      biqa::train_svr_stage(biqa::prepare_experiment(cfg), cfg.output_dir);
    } else if (*ev) {
      const auto cfg = load(ev_o);
      print_report(biqa::evaluate_stage(biqa::prepare_experiment(cfg), cfg.output_dir), ev_o.format);
    } else if (*pred) {
      biqa::ResolveOptions options;
      options.allow_hash_mismatch = allow_mismatch;
      const auto model = biqa::open_model(model_path, options);
      for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";
      const auto p = biqa::predict_image(model, image_path, predict_crops, predict_seed);
      if (predict_format == "json-like") {
        std::cout << "{\"score\": " << biqa::format_double(p.score) << ", \"crop_scores\": [";
        for (std::size_t i = 0; i < p.crop_scores.size(); ++i) {
          std::cout << (i ? ", " : "") << biqa::format_double(p.crop_scores[i]);
        }
        std::cout << "]}\n";
      } else {
        std::cout << "score " << biqa::format_double(p.score) << "\n";
        for (std::size_t i = 0; i < p.crop_scores.size(); ++i) {
          std::cout << "crop " << i << " " << biqa::format_double(p.crop_scores[i]) << "\n";
        }
      }
    } else if (*rep) {
      print_report(biqa::read_report(report_in), report_format);
    }
  } catch (const biqa::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const biqa::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
