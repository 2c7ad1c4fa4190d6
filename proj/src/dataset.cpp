// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include "biqa/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "biqa/error.hpp"
#include "biqa/rng.hpp"
#include "biqa/text.hpp"

namespace biqa {

namespace fs = std::filesystem;

void DatasetManifest::validate() const {
  if (!(scale.min < scale.max)) {
    throw DataError("manifest '" + name + "': scale_min must be below scale_max");
  }
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) throw DataError("duplicate image id '" + r.id + "'");
    if (!std::isfinite(r.mos) || !scale.contains(r.mos)) {
      throw DataError("image '" + r.id + "': mos " + format_double(r.mos) + " outside [" +
                      format_double(scale.min) + ", " + format_double(scale.max) + "]");
    }
    if (r.mos_std && !(*r.mos_std >= 0.0)) {
      throw DataError("image '" + r.id + "': negative mos_std");
    }
  }
}

const ImageRecord& DatasetManifest::at(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return r;
  }
  throw DataError("unknown image id '" + std::string(id) + "'");
}

std::vector<std::string> DatasetManifest::ids() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.id);
  return out;
}

DatasetManifest load_manifest(const fs::path& path, std::optional<ScaleBounds> scale_override) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());

  DatasetManifest manifest;
  manifest.name = path.stem().string();
  std::optional<double> scale_min, scale_max;
  std::vector<std::string> columns;
  char delim = ',';
  int col_id = -1, col_path = -1, col_mos = -1, col_std = -1, col_group = -1;

  const fs::path base = path.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);

    if (trimmed.front() == '#') {
      if (!columns.empty()) continue;
      const std::string body = trim(trimmed.substr(1));
      const auto sep = body.find_first_of(":=");
      if (sep == std::string::npos) continue;
      const std::string key = trim(body.substr(0, sep));
      const std::string value = trim(body.substr(sep + 1));
      if (key == "name") {
        manifest.name = value;
      } else if (key == "scale_min") {
        scale_min = parse_double(value, where + ": scale_min");
      } else if (key == "scale_max") {
        scale_max = parse_double(value, where + ": scale_max");
      }
      continue;
    }

    if (columns.empty()) {
      delim = trimmed.find('\t') != std::string::npos ? '\t' : ',';
      columns = split(trimmed, delim);
      for (int i = 0; i < static_cast<int>(columns.size()); ++i) {
        const std::string c = trim(columns[i]);
        if (c == "id") col_id = i;
        else if (c == "path") col_path = i;
        else if (c == "mos") col_mos = i;
        else if (c == "mos_std") col_std = i;
        else if (c == "ref_group") col_group = i;
      }
      if (col_id < 0 || col_path < 0 || col_mos < 0) {
        throw DataError(where + ": header must name columns id, path and mos");
      }
      continue;
    }

    const auto fields = split(line, delim);
    auto field = [&](int col) -> std::string {
      if (col < 0 || col >= static_cast<int>(fields.size())) return {};
      return trim(fields[col]);
    };
    if (fields.size() < 3) throw DataError(where + ": malformed row (expected id, path, mos)");
    ImageRecord r;
    r.id = field(col_id);
    if (r.id.empty()) throw DataError(where + ": empty id");
    const std::string p = field(col_path);
    if (p.empty()) throw DataError(where + ": empty path");
    r.path = fs::path(p).is_absolute() ? fs::path(p) : base / p;
    r.mos = parse_double(field(col_mos), where + ": mos");
    if (const auto s = field(col_std); !s.empty()) {
      r.mos_std = parse_double(s, where + ": mos_std");
      if (!(*r.mos_std >= 0.0)) throw DataError(where + ": mos_std must be >= 0");
    }
    if (const auto g = field(col_group); !g.empty()) r.ref_group = g;
    manifest.records.push_back(std::move(r));
    // Keep the line number for range errors raised after the scale is known.
    if (scale_override || (scale_min && scale_max)) {
      const ScaleBounds s = scale_override ? *scale_override : ScaleBounds{*scale_min, *scale_max};
      if (!s.contains(manifest.records.back().mos)) {
        throw DataError(where + ": mos " + format_double(manifest.records.back().mos) +
                        " outside scale [" + format_double(s.min) + ", " +
                        format_double(s.max) + "] (image '" + manifest.records.back().id +
                        "')");
      }
    }
  }
  if (columns.empty()) throw DataError(path.string() + ": missing header row");

  if (scale_override) {
    manifest.scale = *scale_override;
  } else if (scale_min && scale_max) {
    manifest.scale = {*scale_min, *scale_max};
  } else {
    throw DataError(path.string() + ": scale bounds not declared (scale_min/scale_max)");
  }
  manifest.validate();
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  const fs::path base = path.parent_path();
  out << "# name: " << manifest.name << "\n";
  out << "# scale_min: " << format_double(manifest.scale.min) << "\n";
  out << "# scale_max: " << format_double(manifest.scale.max) << "\n";
  out << "id,path,mos,mos_std,ref_group\n";
  for (const auto& r : manifest.records) {
    fs::path p = r.path;
    if (!base.empty() && p.is_absolute() == base.is_absolute()) {
      const fs::path rel = p.lexically_relative(base);
      if (!rel.empty() && *rel.begin() != "..") p = rel;
    }
    out << r.id << ',' << p.generic_string() << ',' << format_double(r.mos) << ',';
    if (r.mos_std) out << format_double(*r.mos_std);
    out << ',';
    if (r.ref_group) out << *r.ref_group;
    out << '\n';
  }
  if (!out) throw DataError("failed writing manifest " + path.string());
}

// ---------------------------------------------------------------------------

std::string_view to_string(QualityClass c) {
  switch (c) {
    case QualityClass::kBad: return "bad";
    case QualityClass::kPoor: return "poor";
    case QualityClass::kFair: return "fair";
    case QualityClass::kGood: return "good";
    case QualityClass::kExcellent: return "excellent";
  }
  return "?";
}

QualityClass partition_mos(double mos, const ScaleBounds& scale) {
  if (!(scale.min < scale.max)) throw DataError("degenerate MOS scale");
  if (!std::isfinite(mos) || !scale.contains(mos)) {
    throw DataError("mos " + format_double(mos) + " outside scale [" + format_double(scale.min) +
                    ", " + format_double(scale.max) + "]");
  }
  // Multiply before dividing so bracket edges stay exact on a [0, 100] scale.
  const double s = (scale.min == 0.0 && scale.max == 100.0)
                       ? mos
                       : (mos - scale.min) * 100.0 / (scale.max - scale.min);
  if (s <= 20.0) return QualityClass::kBad;
  if (s <= 40.0) return QualityClass::kPoor;
  if (s <= 60.0) return QualityClass::kFair;
  if (s <= 80.0) return QualityClass::kGood;
  return QualityClass::kExcellent;
}

ClassWeights class_weights(std::span<const QualityClass> labels) {
  std::array<long, kNumQualityClasses> counts{};
  for (auto c : labels) ++counts[static_cast<int>(c)];
  const long most = *std::max_element(counts.begin(), counts.end());
  ClassWeights out;
  for (auto c : kAllQualityClasses) {
    const long n = counts[static_cast<int>(c)];
    if (n > 0) out[c] = static_cast<double>(most) / static_cast<double>(n);
  }
  return out;
}

ClassWeights class_weights(const DatasetManifest& manifest) {
  std::vector<QualityClass> labels;
  labels.reserve(manifest.records.size());
  for (const auto& r : manifest.records) labels.push_back(partition_mos(r.mos, manifest.scale));
  return class_weights(labels);
}

ClassWeights class_weights(const DatasetManifest& manifest, std::span<const std::string> ids) {
  std::vector<QualityClass> labels;
  labels.reserve(ids.size());
  for (const auto& id : ids) labels.push_back(partition_mos(manifest.at(id).mos, manifest.scale));
  return class_weights(labels);
}

// ---------------------------------------------------------------------------

std::string_view to_string(Protocol p) {
  return p == Protocol::kChallenge ? "challenge" : "legacy";
}

Protocol parse_protocol(std::string_view text) {
  if (text == "challenge") return Protocol::kChallenge;
  if (text == "legacy") return Protocol::kLegacy;
  throw UsageError("unknown protocol '" + std::string(text) + "' (challenge|legacy)");
}

SplitPlan make_splits(const DatasetManifest& manifest, Protocol protocol, std::uint64_t seed,
                      std::optional<int> repeats) {
  const int n_repeats =
      repeats.value_or(protocol == Protocol::kChallenge ? kChallengeRepeats : kLegacyRepeats);
  if (n_repeats < 1) throw UsageError("split repeats must be >= 1");
  if (manifest.records.empty()) throw DataError("cannot split an empty manifest");

  SplitPlan plan;
  plan.protocol = protocol;
  plan.seed = seed;
  Rng rng(derive_seed(seed, "splits"));

  if (protocol == Protocol::kChallenge) {
    const std::size_t n = manifest.records.size();
    const std::size_t n_train = (8 * n + 5) / 10;  // round(0.8 n), halves up
    for (int r = 0; r < n_repeats; ++r) {
      std::vector<std::string> ids = manifest.ids();
      rng.shuffle(ids);
      SplitRepeat rep;
      rep.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
      rep.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
      plan.repeats.push_back(std::move(rep));
    }
    return plan;
  }

  // Legacy: whole reference groups move together.
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& r : manifest.records) {
    if (!r.ref_group) {
      throw DataError("legacy protocol requires ref_group (missing for '" + r.id + "')");
    }
    groups[*r.ref_group].push_back(r.id);
  }
  std::vector<std::string> names;
  for (const auto& [g, _] : groups) names.push_back(g);
  const std::size_t g = names.size();
  const std::size_t g_train = (6 * g) / 10;
  const std::size_t g_val = (g - g_train) / 2;
  for (int r = 0; r < n_repeats; ++r) {
    std::vector<std::string> order = names;
    rng.shuffle(order);
    SplitRepeat rep;
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto& fold = i < g_train ? rep.train : (i < g_train + g_val ? rep.val : rep.test);
      const auto& members = groups[order[i]];
      fold.insert(fold.end(), members.begin(), members.end());
    }
    plan.repeats.push_back(std::move(rep));
  }
  return plan;
}

void write_split_plan(const SplitPlan& plan, std::ostream& out) {
  out << "#protocol\t" << to_string(plan.protocol) << "\n";
  out << "#seed\t" << plan.seed << "\n";
  out << "#repeats\t" << plan.repeats.size() << "\n";
  out << "repeat\tfold\tid\n";
  for (std::size_t r = 0; r < plan.repeats.size(); ++r) {
    const auto& rep = plan.repeats[r];
    for (const auto& id : rep.train) out << r << "\ttrain\t" << id << "\n";
    for (const auto& id : rep.val) out << r << "\tval\t" << id << "\n";
    for (const auto& id : rep.test) out << r << "\ttest\t" << id << "\n";
  }
}

SplitPlan read_split_plan(std::istream& in) {
  SplitPlan plan;
  std::optional<std::size_t> n_repeats;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    const std::string where = "split plan line " + std::to_string(line_no);
    if (line.front() == '#') {
      if (fields.size() != 2) throw DataError(where + ": malformed header");
      if (fields[0] == "#protocol") plan.protocol = parse_protocol(fields[1]);
      else if (fields[0] == "#seed") plan.seed = std::stoull(fields[1]);
      else if (fields[0] == "#repeats") n_repeats = std::stoull(fields[1]);
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    if (fields.size() != 3) throw DataError(where + ": expected repeat, fold, id");
    const std::size_t r = static_cast<std::size_t>(parse_double(fields[0], where));
    if (plan.repeats.size() <= r) plan.repeats.resize(r + 1);
    auto& rep = plan.repeats[r];
    if (fields[1] == "train") rep.train.push_back(fields[2]);
    else if (fields[1] == "val") rep.val.push_back(fields[2]);
    else if (fields[1] == "test") rep.test.push_back(fields[2]);
    else throw DataError(where + ": unknown fold '" + fields[1] + "'");
  }
  if (n_repeats && plan.repeats.size() < *n_repeats) plan.repeats.resize(*n_repeats);
  return plan;
}

}  // namespace biqa
