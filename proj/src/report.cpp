// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

#include "biqa/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "biqa/error.hpp"
#include "biqa/text.hpp"

namespace biqa {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

const ConfigResult& EvalReport::find(std::string_view label) const {
  for (const auto& c : configs) {
    if (c.fusion.label() == label) return c;
  }
  throw DataError("report has no configuration '" + std::string(label) + "'");
}

namespace {

bool same_double(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same_ttest(const TTestResult& a, const TTestResult& b) {
  return same_double(a.t, b.t) && same_double(a.p, b.p) && a.df == b.df && a.degenerate == b.degenerate;
}

}  // namespace

bool operator==(const SelectionResult& a, const SelectionResult& b) {
  if (a.group != b.group || a.selection.n_star != b.selection.n_star ||
      a.selection.n_best != b.selection.n_best || a.selection.median_lcc != b.selection.median_lcc ||
      a.selection.versus_best.size() != b.selection.versus_best.size()) {
    return false;
  }
  for (const auto& [n, t] : a.selection.versus_best) {
    auto it = b.selection.versus_best.find(n);
    if (it == b.selection.versus_best.end() || !same_ttest(t, it->second)) return false;
  }
  return true;
}

bool operator==(const PairwiseTTest& a, const PairwiseTTest& b) {
  return a.a == b.a && a.b == b.b && same_ttest(a.result, b.result);
}

bool operator==(const EvalReport& a, const EvalReport& b) {
  return a.code_version == b.code_version && a.config == b.config && a.dataset == b.dataset &&
         a.image_count == b.image_count && a.configs == b.configs && a.selections == b.selections &&
         a.ttests == b.ttests && a.winner == b.winner;
}

namespace {

std::string group_label(const FusionConfig& f) {
  std::string label = f.label();
  return label.substr(0, label.find('@'));
}

std::optional<std::vector<double>> split_lccs(const ConfigResult& c) {
  std::vector<double> v;
  for (const auto& s : c.splits) {
    if (!s.metrics.lcc) return std::nullopt;
    v.push_back(*s.metrics.lcc);
  }
  return v;
}

}  // namespace

void aggregate(EvalReport& report, double alpha) {
  report.selections.clear();
  report.ttests.clear();
  report.winner.clear();
  for (auto& c : report.configs) {
    if (c.splits.empty()) throw DataError("configuration " + c.fusion.label() + " has no splits");
    std::vector<SplitMetrics> m;
    for (const auto& s : c.splits) m.push_back(s.metrics);
    c.median = median_over_splits(m);
  }
  if (report.configs.empty()) return;

  // Groups in first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::map<int, const ConfigResult*>> groups;
  for (const auto& c : report.configs) {
    const std::string g = group_label(c.fusion);
    if (!groups.count(g)) order.push_back(g);
    groups[g][c.fusion.n_crops] = &c;
  }
  const bool testable = report.configs.front().splits.size() >= 2;
  std::map<std::string, int> chosen_n;
  if (testable) {
    for (const auto& g : order) {
      if (groups[g].size() < 2) continue;
      std::map<int, std::vector<double>> lccs;
      bool complete = true;
      for (const auto& [n, c] : groups[g]) {
        auto v = split_lccs(*c);
        if (!v) {
          complete = false;
          break;
        }
        lccs[n] = *v;
      }
      if (!complete) continue;
      SelectionResult sel{g, select_crop_count(lccs, alpha)};
      chosen_n[g] = sel.selection.n_star;
      report.selections.push_back(std::move(sel));
    }
    for (std::size_t i = 0; i < report.configs.size(); ++i) {
      const auto a = split_lccs(report.configs[i]);
      if (!a) continue;
      for (std::size_t j = i + 1; j < report.configs.size(); ++j) {
        const auto b = split_lccs(report.configs[j]);
        if (!b) continue;
        report.ttests.push_back({report.configs[i].fusion.label(), report.configs[j].fusion.label(),
                                 two_sample_ttest(*a, *b)});
      }
    }
  }

  const ConfigResult* best = &report.configs.front();
  double best_lcc = -std::numeric_limits<double>::infinity();
  for (const auto& c : report.configs) {
    if (c.median.lcc && *c.median.lcc > best_lcc) {
      best_lcc = *c.median.lcc;
      best = &c;
    }
  }
  const std::string g = group_label(best->fusion);
  if (auto it = chosen_n.find(g); it != chosen_n.end()) best = groups[g][it->second];
  report.winner = best->fusion.label();
}

namespace {

Json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double to_number(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw DataError("report: expected a number, got " + j.dump());
}

Json optional_number(const std::optional<double>& v) { return v ? number(*v) : Json(nullptr); }

std::optional<double> to_optional(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return to_number(j);
}

Json metrics_json(const SplitMetrics& m) {
  Json j;
  j["lcc"] = optional_number(m.lcc);
  j["srocc"] = optional_number(m.srocc);
  j["rmse_pct"] = number(m.rmse_pct);
  j["mae_pct"] = number(m.mae_pct);
  if (m.sigma_coverage) {
    j["sigma_coverage"] = Json::array({(*m.sigma_coverage)[0], (*m.sigma_coverage)[1], (*m.sigma_coverage)[2]});
  } else {
    j["sigma_coverage"] = nullptr;
  }
  return j;
}

SplitMetrics metrics_from(const Json& j) {
  SplitMetrics m;
  m.lcc = to_optional(j.at("lcc"));
  m.srocc = to_optional(j.at("srocc"));
  m.rmse_pct = to_number(j.at("rmse_pct"));
  m.mae_pct = to_number(j.at("mae_pct"));
  if (!j.at("sigma_coverage").is_null()) {
    const auto& c = j.at("sigma_coverage");
    m.sigma_coverage = std::array<double, 3>{to_number(c.at(0)), to_number(c.at(1)), to_number(c.at(2))};
  }
  return m;
}

Json ttest_json(const TTestResult& t) {
  Json j;
  j["t"] = number(t.t);
  j["p"] = number(t.p);
  j["df"] = number(t.df);
  j["degenerate"] = t.degenerate;
  return j;
}

TTestResult ttest_from(const Json& j) {
  return {to_number(j.at("t")), to_number(j.at("p")), to_number(j.at("df")), j.at("degenerate").get<bool>()};
}

Json report_json(const EvalReport& r) {
  Json j;
  j["format"] = "biqa-report";
  j["version"] = kReportVersion;
  j["code_version"] = r.code_version;
  Json cfg = Json::object();
  for (const auto& [k, v] : r.config) cfg[k] = v;
  j["config"] = cfg;
  j["dataset"] = {{"name", r.dataset}, {"images", r.image_count}};
  Json configs = Json::array();
  for (const auto& c : r.configs) {
    Json cj;
    cj["fusion"] = c.fusion.label();
    cj["median"] = metrics_json(c.median);
    Json splits = Json::array();
    for (const auto& s : c.splits) {
      Json sj;
      sj["repeat"] = s.repeat;
      sj["selected_c"] = optional_number(s.selected_c);
      sj["metrics"] = metrics_json(s.metrics);
      Json preds = Json::array();
      for (const auto& p : s.predictions) {
        preds.push_back(Json::array({p.id, number(p.truth), optional_number(p.truth_std), number(p.predicted)}));
      }
      sj["predictions"] = preds;
      splits.push_back(sj);
    }
    cj["splits"] = splits;
    configs.push_back(cj);
  }
  j["configs"] = configs;
  Json sels = Json::array();
  for (const auto& s : r.selections) {
    Json sj;
    sj["group"] = s.group;
    sj["n_star"] = s.selection.n_star;
    sj["n_best"] = s.selection.n_best;
    Json med = Json::object();
    for (const auto& [n, v] : s.selection.median_lcc) med[std::to_string(n)] = number(v);
    sj["median_lcc"] = med;
    Json vs = Json::object();
    for (const auto& [n, t] : s.selection.versus_best) vs[std::to_string(n)] = ttest_json(t);
    sj["versus_best"] = vs;
    sels.push_back(sj);
  }
  j["selections"] = sels;
  Json tts = Json::array();
  for (const auto& t : r.ttests) {
    Json tj = ttest_json(t.result);
    tj["a"] = t.a;
    tj["b"] = t.b;
    tts.push_back(tj);
  }
  j["ttests"] = tts;
  j["winner"] = r.winner;
  return j;
}

}  // namespace

std::string render_json(const EvalReport& report) { return report_json(report).dump(2) + "\n"; }

EvalReport parse_report(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "biqa-report") throw DataError("not a biqa report");
    if (j.at("version").get<int>() != kReportVersion) {
      throw DataError("unsupported report version " + j.at("version").dump());
    }
    EvalReport r;
    r.code_version = j.at("code_version").get<std::string>();
    for (const auto& [k, v] : j.at("config").items()) r.config.emplace_back(k, v.get<std::string>());
    r.dataset = j.at("dataset").at("name").get<std::string>();
    r.image_count = j.at("dataset").at("images").get<int>();
    for (const auto& cj : j.at("configs")) {
      ConfigResult c;
      c.fusion = FusionConfig::parse(cj.at("fusion").get<std::string>());
      c.median = metrics_from(cj.at("median"));
      for (const auto& sj : cj.at("splits")) {
        SplitResult s;
        s.repeat = sj.at("repeat").get<int>();
        s.selected_c = to_optional(sj.at("selected_c"));
        s.metrics = metrics_from(sj.at("metrics"));
        for (const auto& pj : sj.at("predictions")) {
          s.predictions.push_back({pj.at(0).get<std::string>(), to_number(pj.at(1)), to_optional(pj.at(2)),
                                   to_number(pj.at(3))});
        }
        c.splits.push_back(std::move(s));
      }
      r.configs.push_back(std::move(c));
    }
    for (const auto& sj : j.at("selections")) {
      SelectionResult s;
      s.group = sj.at("group").get<std::string>();
      s.selection.n_star = sj.at("n_star").get<int>();
      s.selection.n_best = sj.at("n_best").get<int>();
      for (const auto& [n, v] : sj.at("median_lcc").items()) {
        s.selection.median_lcc[static_cast<int>(parse_int(n, "crop count"))] = to_number(v);
      }
      for (const auto& [n, v] : sj.at("versus_best").items()) {
        s.selection.versus_best[static_cast<int>(parse_int(n, "crop count"))] = ttest_from(v);
      }
      r.selections.push_back(std::move(s));
    }
    for (const auto& tj : j.at("ttests")) {
      r.ttests.push_back({tj.at("a").get<std::string>(), tj.at("b").get<std::string>(), ttest_from(tj)});
    }
    r.winner = j.at("winner").get<std::string>();
    return r;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string fixed(const std::optional<double>& v, int decimals) { return v ? fixed(*v, decimals) : "n/a"; }

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string render_table(const EvalReport& r) {
  std::ostringstream out;
  const std::size_t splits = r.configs.empty() ? 0 : r.configs.front().splits.size();
  out << "dataset " << r.dataset << " (" << r.image_count << " images), " << splits << " splits\n\n";
  std::size_t width = 13;
  for (const auto& c : r.configs) width = std::max(width, c.fusion.label().size() + 2);
  out << pad("configuration", width) << pad("LCC", 9) << pad("SROCC", 9) << pad("RMSE%", 9)
      << pad("MAE%", 9) << "sigma 1/2/3\n";
  for (const auto& c : r.configs) {
    const auto& m = c.median;
    std::string cov = "n/a";
    if (m.sigma_coverage) {
      cov = fixed((*m.sigma_coverage)[0], 3) + "/" + fixed((*m.sigma_coverage)[1], 3) + "/" +
            fixed((*m.sigma_coverage)[2], 3);
    }
    out << pad(c.fusion.label(), width) << pad(fixed(m.lcc, 4), 9) << pad(fixed(m.srocc, 4), 9)
        << pad(fixed(m.rmse_pct, 3), 9) << pad(fixed(m.mae_pct, 3), 9) << cov << "\n";
  }
  out << "\nwinner: " << r.winner << "\n";
  if (!r.selections.empty()) {
    out << "\ncrop-count selection\n";
    for (const auto& s : r.selections) {
      out << "  " << s.group << ": best n=" << s.selection.n_best << ", chosen n*=" << s.selection.n_star
          << "\n";
    }
  }
  out << "\nper-split LCC\n";
  for (const auto& c : r.configs) {
    out << "  " << pad(c.fusion.label(), width);
    for (const auto& s : c.splits) out << " " << fixed(s.metrics.lcc, 4);
    out << "\n";
  }
  return out.str();
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "table") return ReportFormat::kTable;
  if (text == "json-like" || text == "json") return ReportFormat::kJson;
  throw UsageError("unknown format '" + std::string(text) + "' (table|json-like)");
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

void emit_report(const EvalReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create report directory " + dir.string() + ": " + ec.message());
  write_text(dir / "report.json", render_json(report));
  write_text(dir / "report.txt", render_table(report));
  if (!report.winner.empty()) {
    std::ostringstream csv;
    csv << "repeat,id,truth,predicted\n";
    for (const auto& s : report.find(report.winner).splits) {
      for (const auto& p : s.predictions) {
        csv << s.repeat << "," << p.id << "," << format_double(p.truth) << "," << format_double(p.predicted)
            << "\n";
      }
    }
    write_text(dir / "scatter.csv", csv.str());
  }
}

EvalReport read_report(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open report " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

}  // namespace biqa
