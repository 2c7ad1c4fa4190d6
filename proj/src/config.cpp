// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include "biqa/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "biqa/error.hpp"
#include "biqa/text.hpp"

namespace biqa {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

int PreprocessConfig::resize_target(int input_size) const {
  if (central_resize > 0) return central_resize;
  return static_cast<int>(std::lround(input_size * 256.0 / 227.0));
}

std::string_view to_string(BackboneKind k) {
  return k == BackboneKind::kDesk ? "desk" : "precomputed";
}

std::string_view to_string(CropMode m) {
  return m == CropMode::kCentralCrop ? "central-crop" : "random-crops";
}

std::string_view to_string(FinetuneScope s) {
  return s == FinetuneScope::kPerSplit ? "per-split" : "global";
}

int ExperimentConfig::max_crops() const {
  int n = 1;
  for (const auto& f : fusions) n = std::max(n, f.n_crops);
  return n;
}

int ExperimentConfig::finetune_crops() const {
  return finetune_crops_per_image > 0 ? finetune_crops_per_image : max_crops();
}

int ExperimentConfig::repeat_count() const {
  return repeats.value_or(protocol == Protocol::kChallenge ? kChallengeRepeats : kLegacyRepeats);
}

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw UsageError("config: experiment.manifest is required");
  if (repeats && *repeats < 1) throw UsageError("config: experiment.repeats must be >= 1");
  if (jobs < 1) throw UsageError("config: experiment.jobs must be >= 1");
  if (fusions.empty()) throw UsageError("config: at least one fusion configuration is required");
  std::set<FusionConfig> unique;
  for (const auto& f : fusions) {
    f.validate();
    if (!unique.insert(f).second) throw UsageError("config: duplicate fusion configuration " + f.label());
  }
  if (preprocess.mode == CropMode::kCentralCrop) {
    if (fusions.size() != 1 || fusions.front().n_crops != 1) {
      throw UsageError("config: central-crop mode takes a single fusion configuration with 1 crop");
    }
    if (preprocess.central_resize < 0) throw UsageError("config: preprocess.central_resize must be >= 0");
  }
  if (backbone == BackboneKind::kPrecomputed) {
    if (features_path.empty()) throw UsageError("config: backbone.features is required for precomputed features");
    if (finetune) throw UsageError("config: fine-tuning requires the desk backbone");
  } else {
    arch.validate();
    if (preprocess.mode == CropMode::kCentralCrop &&
        preprocess.resize_target(arch.input_size) < arch.input_size) {
      throw UsageError("config: preprocess.central_resize is smaller than the network input");
    }
  }
  if (finetune) {
    train.validate();
    if (protocol == Protocol::kLegacy) {
      throw UsageError("config: legacy runs keep the backbone fixed; disable finetune.enabled");
    }
  }
  if (finetune_crops_per_image < 0) throw UsageError("config: finetune.crops_per_image must be >= 0");
  svr.validate();
  if (c_grid.empty()) throw UsageError("config: svr.c_grid must not be empty");
  for (double c : c_grid) {
    if (!(c > 0.0) || !std::isfinite(c)) throw UsageError("config: svr.c_grid values must be > 0");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("config: selection.alpha must be in (0, 1)");
}

namespace {

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_double(v[i]);
  }
  return s;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

bool parse_bool(std::string_view s, std::string_view what) {
  const std::string t = trim(s);
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw UsageError("config: " + std::string(what) + " must be true or false, got '" + t + "'");
}

std::vector<std::string> parse_list(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& item : split(s, ',')) {
    std::string t = trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

int parse_count(std::string_view s, std::string_view what) {
  const long long v = parse_int(trim(s), what);
  if (v < INT32_MIN || v > INT32_MAX) throw UsageError("config: " + std::string(what) + " out of range");
  return static_cast<int>(v);
}

// Resolves `p` relative to the config directory unless absolute.
fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> ExperimentConfig::echo() const {
  std::vector<std::pair<std::string, std::string>> e;
  e.emplace_back("experiment.manifest", manifest.generic_string());
  e.emplace_back("experiment.protocol", std::string(to_string(protocol)));
  e.emplace_back("experiment.seed", std::to_string(seed));
  e.emplace_back("experiment.repeats", std::to_string(repeat_count()));
  e.emplace_back("experiment.final_model", bool_text(final_model));
  e.emplace_back("backbone.kind", std::string(to_string(backbone)));
  if (backbone == BackboneKind::kPrecomputed) {
    e.emplace_back("backbone.features", features_path.generic_string());
  } else {
    e.emplace_back("backbone.checkpoint", checkpoint_path.generic_string());
    e.emplace_back("backbone.input_size", std::to_string(arch.input_size));
    e.emplace_back("backbone.feature_dim", std::to_string(arch.feature_dim));
  }
  e.emplace_back("preprocess.mode", std::string(to_string(preprocess.mode)));
  if (preprocess.mode == CropMode::kCentralCrop && backbone == BackboneKind::kDesk) {
    e.emplace_back("preprocess.central_resize", std::to_string(preprocess.resize_target(arch.input_size)));
  }
  std::string fl;
  for (std::size_t i = 0; i < fusions.size(); ++i) {
    if (i) fl += ",";
    fl += fusions[i].label();
  }
  e.emplace_back("fusion.configs", fl);
  e.emplace_back("svr.C", format_double(svr.C));
  e.emplace_back("svr.epsilon", format_double(svr.epsilon));
  e.emplace_back("svr.tol", format_double(svr.tol));
  e.emplace_back("svr.max_passes", std::to_string(svr.max_passes));
  e.emplace_back("svr.standardize", bool_text(svr.standardize));
  e.emplace_back("svr.c_grid", join_doubles(c_grid));
  e.emplace_back("svr.clip_predictions", bool_text(clip_predictions));
  e.emplace_back("finetune.enabled", bool_text(finetune));
  if (finetune) {
    e.emplace_back("finetune.scope", std::string(to_string(finetune_scope)));
    e.emplace_back("finetune.iterations", std::to_string(train.iterations));
    e.emplace_back("finetune.batch_size", std::to_string(train.batch_size));
    e.emplace_back("finetune.learning_rate", format_double(train.learning_rate));
    e.emplace_back("finetune.momentum", format_double(train.momentum));
    e.emplace_back("finetune.head_init_std", format_double(train.head_init_std));
    e.emplace_back("finetune.frozen_layers", std::to_string(train.frozen_layers));
    e.emplace_back("finetune.crops_per_image", std::to_string(finetune_crops()));
  }
  e.emplace_back("selection.alpha", format_double(alpha));
  return e;
}

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  // The INI reader only knows ';' comments.
  std::string prepared;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const std::string t = trim(line);
    prepared += (!t.empty() && t[0] == '#') ? ";" : line;
    prepared += "\n";
  }
  pt::ptree tree;
  try {
    std::istringstream in(prepared);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw UsageError("config: line " + std::to_string(e.line()) + ": " + e.message());
  }

  ExperimentConfig cfg;
  std::optional<std::vector<std::string>> schemes;
  std::optional<std::vector<int>> crops;

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw UsageError("config: key '" + section + "' must appear inside a section");
    }
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      const std::string v = trim(node.data());
      if (name == "experiment.manifest") cfg.manifest = resolve(base_dir, v);
      else if (name == "experiment.protocol") cfg.protocol = parse_protocol(v);
      else if (name == "experiment.seed") cfg.seed = static_cast<std::uint64_t>(parse_int(v, name));
      else if (name == "experiment.repeats") cfg.repeats = parse_count(v, name);
      else if (name == "experiment.output") cfg.output_dir = resolve(base_dir, v);
      else if (name == "experiment.jobs") cfg.jobs = parse_count(v, name);
      else if (name == "experiment.final_model") cfg.final_model = parse_bool(v, name);
      else if (name == "backbone.kind") {
        if (v == "desk") cfg.backbone = BackboneKind::kDesk;
        else if (v == "precomputed") cfg.backbone = BackboneKind::kPrecomputed;
        else throw UsageError("config: backbone.kind must be desk or precomputed, got '" + v + "'");
      } else if (name == "backbone.features") cfg.features_path = resolve(base_dir, v);
      else if (name == "backbone.checkpoint") cfg.checkpoint_path = v.empty() ? fs::path() : resolve(base_dir, v);
      else if (name == "backbone.input_size") cfg.arch.input_size = parse_count(v, name);
      else if (name == "backbone.feature_dim") cfg.arch.feature_dim = parse_count(v, name);
      else if (name == "preprocess.mode") {
        if (v == "central-crop") cfg.preprocess.mode = CropMode::kCentralCrop;
        else if (v == "random-crops") cfg.preprocess.mode = CropMode::kRandomCrops;
        else throw UsageError("config: preprocess.mode must be central-crop or random-crops, got '" + v + "'");
      } else if (name == "preprocess.central_resize") cfg.preprocess.central_resize = parse_count(v, name);
      else if (name == "fusion.schemes") schemes = parse_list(v);
      else if (name == "fusion.crops") {
        if (v == "default") {
          crops = default_crop_grid();
        } else {
          std::vector<int> c;
          for (const auto& item : parse_list(v)) c.push_back(parse_count(item, name));
          crops = c;
        }
      } else if (name == "svr.C") cfg.svr.C = parse_double(v, name);
      else if (name == "svr.epsilon") cfg.svr.epsilon = parse_double(v, name);
      else if (name == "svr.tol") cfg.svr.tol = parse_double(v, name);
      else if (name == "svr.max_passes") cfg.svr.max_passes = parse_count(v, name);
      else if (name == "svr.standardize") cfg.svr.standardize = parse_bool(v, name);
      else if (name == "svr.c_grid") {
        cfg.c_grid.clear();
        for (const auto& item : parse_list(v)) cfg.c_grid.push_back(parse_double(item, name));
      } else if (name == "svr.clip_predictions") cfg.clip_predictions = parse_bool(v, name);
      else if (name == "finetune.enabled") cfg.finetune = parse_bool(v, name);
      else if (name == "finetune.scope") {
        if (v == "per-split") cfg.finetune_scope = FinetuneScope::kPerSplit;
        else if (v == "global") cfg.finetune_scope = FinetuneScope::kGlobal;
        else throw UsageError("config: finetune.scope must be per-split or global, got '" + v + "'");
      } else if (name == "finetune.iterations") cfg.train.iterations = parse_count(v, name);
      else if (name == "finetune.batch_size") cfg.train.batch_size = parse_count(v, name);
      else if (name == "finetune.learning_rate") cfg.train.learning_rate = parse_double(v, name);
      else if (name == "finetune.momentum") cfg.train.momentum = parse_double(v, name);
      else if (name == "finetune.head_init_std") cfg.train.head_init_std = parse_double(v, name);
      else if (name == "finetune.frozen_layers") cfg.train.frozen_layers = parse_count(v, name);
      else if (name == "finetune.crops_per_image") cfg.finetune_crops_per_image = parse_count(v, name);
      else if (name == "selection.alpha") cfg.alpha = parse_double(v, name);
      else throw UsageError("config: unknown setting '" + name + "'");
    }
  }

  if (schemes || crops) {
    const std::vector<std::string> s = schemes.value_or(std::vector<std::string>{"prediction_pool:avg"});
    const std::vector<int> c = crops.value_or(
        cfg.preprocess.mode == CropMode::kCentralCrop ? std::vector<int>{1} : std::vector<int>{10});
    cfg.fusions.clear();
    for (const auto& scheme : s) {
      for (int n : c) cfg.fusions.push_back(FusionConfig::parse(scheme + "@" + std::to_string(n)));
    }
  } else if (cfg.preprocess.mode == CropMode::kCentralCrop) {
    cfg.fusions = {FusionConfig{FusionScheme::kFeaturePool, PoolOp::kAvg, 1}};
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace biqa
