// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "biqa/fusion.hpp"
#include "biqa/metrics.hpp"

namespace biqa {

inline constexpr std::string_view kCodeVersion = "0.1.0";
inline constexpr int kReportVersion = 1;

struct ImageScore {
  std::string id;
  double truth = 0.0;
  std::optional<double> truth_std;
  double predicted = 0.0;

  bool operator==(const ImageScore&) const = default;
};

struct SplitResult {
  int repeat = 0;
  // Regularisation picked on the validation fold (legacy protocol only).
  std::optional<double> selected_c;
  SplitMetrics metrics;
  std::vector<ImageScore> predictions;  // test fold, manifest order

  bool operator==(const SplitResult&) const = default;
};

struct ConfigResult {
  FusionConfig fusion;
  std::vector<SplitResult> splits;
  SplitMetrics median;

  bool operator==(const ConfigResult&) const = default;
};

struct SelectionResult {
  std::string group;  // fusion label without the crop count
  CropSelection selection;
};

struct PairwiseTTest {
  std::string a;
  std::string b;
  TTestResult result;
};

struct EvalReport {
  std::string code_version{kCodeVersion};
  std::vector<std::pair<std::string, std::string>> config;
  std::string dataset;
  int image_count = 0;
  std::vector<ConfigResult> configs;
  std::vector<SelectionResult> selections;
  std::vector<PairwiseTTest> ttests;
  std::string winner;  // fusion label

  const ConfigResult& find(std::string_view label) const;
};

bool operator==(const SelectionResult& a, const SelectionResult& b);
bool operator==(const PairwiseTTest& a, const PairwiseTTest& b);
bool operator==(const EvalReport& a, const EvalReport& b);

// Medians, selections, t-tests and winner from `configs`; the other fields
// are left as they are.
void aggregate(EvalReport& report, double alpha);

std::string render_json(const EvalReport& report);
EvalReport parse_report(std::string_view json);
std::string render_table(const EvalReport& report);

enum class ReportFormat { kTable, kJson };
ReportFormat parse_report_format(std::string_view text);

// Writes report.json, report.txt and scatter.csv (per-image predictions of
// the winning configuration). Throws DataError if `dir` is not writable.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

EvalReport read_report(const std::filesystem::path& path);

}  // namespace biqa
