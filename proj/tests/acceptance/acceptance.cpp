// Copyright 2026 The biqa Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance harness. Prints one PASS/FAIL/SKIP line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "biqa/backbone.hpp"
#include "biqa/config.hpp"
#include "biqa/dataset.hpp"
#include "biqa/fusion.hpp"
#include "biqa/metrics.hpp"
#include "biqa/pipeline.hpp"
#include "biqa/regressor.hpp"
#include "biqa/report.hpp"
#include "biqa/rng.hpp"
#include "biqa/text.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace biqa;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kPass;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string opt_text(const std::optional<double>& v) { return v ? fmt("%.4f", *v) : "n/a"; }

struct Harness {
  fs::path work_dir;
  int jobs = 1;
  std::optional<EvalReport> ac3_report;
  std::optional<fs::path> ac3_report_file;

  // ---------------------------------------------------------------------------
  // AC-1

  Outcome metric_oracles() {
    Rng rng(derive_seed(101, "ac1"));
    double worst = 0.0;
    auto track = [&](double got, double want) { worst = std::max(worst, std::fabs(got - want)); };

    for (int trial = 0; trial < 100; ++trial) {
      const int n = 3 + static_cast<int>(rng.below(40));
      std::vector<double> x(n), y(n);
      for (int i = 0; i < n; ++i) {
        x[i] = 100 * rng.uniform();
        y[i] = 0.5 * x[i] + 30 * rng.normal();
      }
      track(*pearson_lcc(x, y), oracle::pearson(x, y));
    }
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 3 + static_cast<int>(rng.below(40));
      std::vector<double> x(n), y(n);
      // Small integer ranges force ties on both sides.
      const int levels = 2 + static_cast<int>(rng.below(8));
      for (int i = 0; i < n; ++i) {
        x[i] = static_cast<double>(rng.below(levels));
        y[i] = std::round(x[i] + 2 * rng.normal());
      }
      if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) x[0] += 1;
      if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) y[0] += 1;
      track(*spearman_srocc(x, y), oracle::spearman(x, y));
    }
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(40));
      ScorePairs p;
      for (int i = 0; i < n; ++i) {
        p.truth.push_back(100 * rng.uniform());
        p.predicted.push_back(p.truth.back() + 15 * rng.normal());
      }
      const ScaleBounds scale{0.0, 50.0 + 100 * rng.uniform()};
      const ErrorStats e = error_stats(p, scale);
      const oracle::Errors o = oracle::error_stats(p.predicted, p.truth, scale.max - scale.min);
      track(e.rmse_pct, o.rmse_pct);
      track(e.mae_pct, o.mae_pct);
    }
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a(2 + rng.below(14)), b(2 + rng.below(14));
      const double shift = 2 * rng.normal();
      for (auto& v : a) v = rng.normal();
      for (auto& v : b) v = shift + (0.5 + rng.uniform()) * rng.normal();
      const TTestResult r = two_sample_ttest(a, b);
      const oracle::TTest o = oracle::ttest(a, b);
      track(r.t, o.t);
      track(r.p, o.p);
    }
    return {worst < 1e-8 ? Status::kPass : Status::kFail,
            "400 instances, max |delta| " + fmt("%.2e", worst) + " (limit 1e-8)"};
  }

  // ---------------------------------------------------------------------------
  // AC-2

  Outcome gradient_check() {
    Rng rng(derive_seed(102, "ac2"));
    double worst = 0.0, worst_loss = 0.0, worst_logit = 0.0;
    const int sizes[] = {13, 17, 21, 11};
    const int instances = 24;
    for (int trial = 0; trial < instances; ++trial) {
      const int size = sizes[trial % 4];
      const DeskCnn net = oracle::random_net(size, 8, derive_seed(102, "net", trial));
      std::vector<Crop> batch = {oracle::random_crop(size, derive_seed(102, "crop-a", trial)),
                                 oracle::random_crop(size, derive_seed(102, "crop-b", trial))};
      const std::vector<int> labels = {static_cast<int>(rng.below(5)), static_cast<int>(rng.below(5))};
      const std::vector<double> weights = {0.5 + 1.5 * rng.uniform(), 0.5 + 1.5 * rng.uniform()};
      const std::vector<QualityClass> ql = {static_cast<QualityClass>(labels[0]),
                                            static_cast<QualityClass>(labels[1])};

      DeskCnn::Cache cache;
      const LogitMatrix logits = net.forward(batch, &cache);
      const LossResult loss = weighted_softmax_xent(logits, ql, weights);
      const ParamSet<double> analytic = net.backward(cache, loss.grad);

      const BasicDeskCnn<double> reference = net.cast<double>();
      const double ref_loss = oracle::weighted_loss(reference, batch, labels, weights);
      worst_loss = std::max(worst_loss, std::fabs(loss.loss - ref_loss) / std::max(1.0, std::fabs(ref_loss)));

      // Loss gradient with respect to the logits, by central differences; the
      // loss is averaged over the batch rows.
      std::vector<double> fd_logit(logits.values.size());
      for (std::size_t k = 0; k < logits.values.size(); ++k) {
        const int row = static_cast<int>(k) / kNumQualityClasses;
        std::vector<double> up(logits.values.begin() + row * kNumQualityClasses,
                               logits.values.begin() + (row + 1) * kNumQualityClasses);
        std::vector<double> down = up;
        const int col = static_cast<int>(k) % kNumQualityClasses;
        up[col] += 1e-6;
        down[col] -= 1e-6;
        fd_logit[k] = weights[row] * (oracle::xent(up, labels[row]) - oracle::xent(down, labels[row])) / 2e-6 / 2.0;
      }
      worst_logit = std::max(worst_logit, oracle::relative_error(loss.grad.values, fd_logit));

      const ParamSet<double> numeric = oracle::fd_gradients(reference, batch, labels, weights, 1e-6);
      for (int p = 0; p < kNumParams; ++p) {
        worst = std::max(worst, oracle::relative_error(analytic[p], numeric[p]));
      }
    }
    const bool ok = worst < 1e-4 && worst_loss < 1e-4 && worst_logit < 1e-4;
    return {ok ? Status::kPass : Status::kFail,
            std::to_string(instances) + " nets, 8 tensors each: max parameter rel err " + fmt("%.2e", worst) +
                ", logit grad " + fmt("%.2e", worst_logit) + ", loss " + fmt("%.2e", worst_loss) +
                " (limit 1e-4)"};
  }

  // ---------------------------------------------------------------------------
  // AC-3, AC-4, AC-7, AC-8 share the desk experiment.

  fs::path synth(const std::string& name, double jitter) {
    const fs::path dir = work_dir / name;
    SynthSpec spec;
    spec.count = 200;
    spec.width = 64;
    spec.height = 64;
    spec.mos_std = 5.0;
    spec.mos_jitter = jitter;
    synth_dataset(spec, 1, dir);
    return dir / "manifest.csv";
  }

  ExperimentConfig desk_experiment(const fs::path& manifest) const {
    std::ostringstream ini;
    ini << "[experiment]\nmanifest = " << manifest.string() << "\nseed = 1\nrepeats = 5\nfinal_model = false\n"
        << "[backbone]\ninput_size = 32\n"
        << "[fusion]\nschemes = prediction_pool:avg\ncrops = 10\n"
        << "[finetune]\nenabled = true\niterations = 2000\n";
    ExperimentConfig cfg = parse_config(ini.str(), work_dir);
    cfg.jobs = jobs;
    return cfg;
  }

  const EvalReport& ac3() {
    if (!ac3_report) {
      const ExperimentConfig cfg = desk_experiment(synth("ac3", 0.0));
      RunArtifacts artifacts;
      ac3_report = run_experiment(cfg, &artifacts);
      write_run_outputs(*ac3_report, artifacts, cfg, work_dir / "ac3_out");
      ac3_report_file = work_dir / "ac3_out" / "report.json";
    }
    return *ac3_report;
  }

  Outcome end_to_end() {
    const EvalReport& r = ac3();
    const ConfigResult& c = r.find("prediction_pool:avg@10");
    std::string per;
    for (const auto& s : c.splits) per += " " + opt_text(s.metrics.lcc);
    const bool ok = c.median.lcc && c.median.srocc && *c.median.lcc >= 0.80 && *c.median.srocc >= 0.80;
    return {ok ? Status::kPass : Status::kFail, "median LCC " + opt_text(c.median.lcc) + ", SROCC " +
                                                    opt_text(c.median.srocc) + " (need >= 0.80); per-split LCC" +
                                                    per};
  }

  Outcome trend() {
    const ConfigResult& tuned = ac3().find("prediction_pool:avg@10");
    std::ostringstream ini;
    ini << "[experiment]\nmanifest = " << (work_dir / "ac3" / "manifest.csv").string()
        << "\nseed = 1\nrepeats = 5\nfinal_model = false\n"
        << "[backbone]\ninput_size = 32\n[preprocess]\nmode = central-crop\n";
    ExperimentConfig cfg = parse_config(ini.str(), work_dir);
    cfg.jobs = jobs;
    const EvalReport base = run_experiment(cfg);
    const ConfigResult& b = base.configs.at(0);
    int wins = 0;
    std::string per;
    for (std::size_t i = 0; i < tuned.splits.size(); ++i) {
      const double t = tuned.splits[i].metrics.lcc.value_or(-2), s = b.splits.at(i).metrics.lcc.value_or(-2);
      if (t > s) ++wins;
      per += " " + fmt("%.3f", t) + "/" + fmt("%.3f", s);
    }
    const bool ok = tuned.median.lcc && b.median.lcc && *tuned.median.lcc >= *b.median.lcc - 0.02 && wins >= 4;
    return {ok ? Status::kPass : Status::kFail,
            "fine-tuned " + opt_text(tuned.median.lcc) + " vs untuned central-crop " + opt_text(b.median.lcc) +
                ", fine-tuned ahead in " + std::to_string(wins) + "/5 splits (tuned/base:" + per + ")"};
  }

  Outcome determinism() {
    std::string problems;
    ac3();
    // Second full run, different worker count, fresh output directory.
    const ExperimentConfig base = desk_experiment(work_dir / "ac3" / "manifest.csv");
    ExperimentConfig cfg = base;
    cfg.jobs = jobs == 1 ? 2 : 1;
    RunArtifacts artifacts;
    const EvalReport again = run_experiment(cfg, &artifacts);
    write_run_outputs(again, artifacts, cfg, work_dir / "ac3_repeat");
    const std::string first = oracle::read_text(*ac3_report_file);
    const std::string second = oracle::read_text(work_dir / "ac3_repeat" / "report.json");
    if (first != second) problems += " reports differ;";

    // Challenge folds on a crafted 1162-image manifest.
    DatasetManifest big;
    big.name = "crafted";
    big.scale = {0, 100};
    for (int i = 0; i < 1162; ++i) big.records.push_back({"c" + std::to_string(i), "x.png", 50.0, std::nullopt, std::nullopt});
    for (std::uint64_t seed : {1u, 2u, 99u}) {
      const SplitPlan plan = make_splits(big, Protocol::kChallenge, seed);
      if (plan.repeats.size() != 10) problems += " challenge repeat count;";
      for (const auto& r : plan.repeats) {
        std::set<std::string> all(r.train.begin(), r.train.end());
        all.insert(r.test.begin(), r.test.end());
        if (r.train.size() != 930 || r.test.size() != 232 || !r.val.empty() || all.size() != 1162) {
          problems += " challenge fold sizes;";
        }
      }
      if (!(make_splits(big, Protocol::kChallenge, seed) == plan)) problems += " challenge not reproducible;";
    }

    // Legacy folds on 29 reference groups of uneven size.
    DatasetManifest groups;
    groups.name = "crafted-groups";
    groups.scale = {0, 100};
    for (int g = 0; g < 29; ++g) {
      for (int k = 0; k < 1 + g % 4; ++k) {
        groups.records.push_back({"g" + std::to_string(g) + "_" + std::to_string(k), "x.png", 50.0, std::nullopt,
                                  "ref" + std::to_string(g)});
      }
    }
    std::map<std::string, std::string> group_of;
    for (const auto& r : groups.records) group_of[r.id] = r.ref_group.value_or("");
    const SplitPlan legacy = make_splits(groups, Protocol::kLegacy, 7, 20);
    for (const auto& r : legacy.repeats) {
      std::map<std::string, std::set<int>> seen;
      std::array<std::set<std::string>, 3> per_fold;
      const std::vector<std::string>* folds[] = {&r.train, &r.val, &r.test};
      for (int f = 0; f < 3; ++f) {
        for (const auto& id : *folds[f]) {
          seen[group_of.at(id)].insert(f);
          per_fold[f].insert(group_of.at(id));
        }
      }
      for (const auto& [g, fs_] : seen) {
        if (fs_.size() != 1) problems += " group " + g + " spans folds;";
      }
      if (seen.size() != 29 || per_fold[0].size() != 17 || per_fold[1].size() != 6 || per_fold[2].size() != 6) {
        problems += " legacy group counts;";
      }
    }
    return {problems.empty() ? Status::kPass : Status::kFail,
            problems.empty() ? "second run report byte-identical (" + std::to_string(first.size()) +
                                   " bytes, jobs " + std::to_string(jobs) + " vs " + std::to_string(cfg.jobs) +
                                   "); challenge 930/232 and legacy 17/6/6 groups hold"
                             : problems};
  }

  Outcome sigma_coverage_check() {
    const ExperimentConfig cfg = desk_experiment(synth("ac8", 5.0));
    RunArtifacts artifacts;
    const EvalReport run = run_experiment(cfg, &artifacts);
    write_run_outputs(run, artifacts, cfg, work_dir / "ac8_out");
    const EvalReport r = read_report(work_dir / "ac8_out" / "report.json");
    const ConfigResult& c = r.find("prediction_pool:avg@10");

    std::string problems;
    std::array<std::vector<double>, 3> per_k;
    for (const auto& s : c.splits) {
      std::array<int, 3> hits{};
      int used = 0;
      for (const auto& p : s.predictions) {
        if (!p.truth_std || *p.truth_std == 0.0) continue;
        ++used;
        const double z = std::fabs(p.predicted - p.truth) / *p.truth_std;
        for (int k = 0; k < 3; ++k) hits[k] += z <= k + 1 ? 1 : 0;
      }
      if (!s.metrics.sigma_coverage || used == 0) {
        problems += " split " + std::to_string(s.repeat) + " lacks coverage;";
        continue;
      }
      for (int k = 0; k < 3; ++k) {
        const double hand = static_cast<double>(hits[k]) / used;
        per_k[k].push_back(hand);
        if (hand != (*s.metrics.sigma_coverage)[k]) problems += " split " + std::to_string(s.repeat) + " mismatch;";
      }
    }
    std::string medians;
    if (c.median.sigma_coverage) {
      for (int k = 0; k < 3; ++k) {
        // Median of the hand values, recomputed without the library.
        std::vector<double> v = per_k[k];
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        const double m = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
        if (m != (*c.median.sigma_coverage)[k]) problems += " median mismatch k=" + std::to_string(k + 1) + ";";
        medians += (k ? "/" : "") + fmt("%.1f", 100 * m);
      }
    } else {
      problems += " no median coverage;";
    }
    return {problems.empty() ? Status::kPass : Status::kFail,
            problems.empty() ? "hand recomputation matches all " + std::to_string(c.splits.size()) +
                                   " splits exactly; median coverage " + medians +
                                   "% (full-scale reference 97.2/99.4/99.8%)"
                             : problems};
  }

  // ---------------------------------------------------------------------------
  // AC-5

  Outcome fusion_algebra() {
    long cases = 0;
    std::string problems;
    auto check = [&](const std::vector<FeatureVector>& v, const LinearSVRModel& svr) {
      ++cases;
      const std::size_t n = v.size(), len = v[0].size();
      const FeatureVector lo = pool_features(v, PoolOp::kMin), mid = pool_features(v, PoolOp::kAvg),
                          hi = pool_features(v, PoolOp::kMax);
      for (std::size_t j = 0; j < len; ++j) {
        double a = v[0][j], b = v[0][j];
        for (const auto& x : v) {
          a = std::min(a, x[j]);
          b = std::max(b, x[j]);
        }
        if (lo[j] != a || hi[j] != b || mid[j] < a || mid[j] > b) {
          problems = "pool bounds";
          return false;
        }
      }
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      const double pooled_score = score_image(FusionConfig{FusionScheme::kPredictionPool, PoolOp::kAvg,
                                                           static_cast<int>(n)},
                                              svr, v);
      do {
        std::vector<FeatureVector> perm;
        for (std::size_t i : idx) perm.push_back(v[i]);
        if (pool_features(perm, PoolOp::kAvg) != mid || pool_features(perm, PoolOp::kMin) != lo ||
            pool_features(perm, PoolOp::kMax) != hi) {
          problems = "permutation changed a pooled vector";
          return false;
        }
        if (score_image(FusionConfig{FusionScheme::kPredictionPool, PoolOp::kAvg, static_cast<int>(n)}, svr,
                        perm) != pooled_score) {
          problems = "permutation changed a pooled prediction";
          return false;
        }
      } while (std::next_permutation(idx.begin(), idx.end()));

      const FeatureVector joined = concat_features(v);
      if (joined.size() != n * len || split_concatenated(joined, static_cast<int>(len)) != v) {
        problems = "concat round-trip";
        return false;
      }
      if (n == 1) {
        std::optional<double> ref;
        for (auto scheme : {FusionScheme::kFeaturePool, FusionScheme::kPredictionPool}) {
          for (auto op : {PoolOp::kMin, PoolOp::kAvg, PoolOp::kMax}) {
            const double s = score_image(FusionConfig{scheme, op, 1}, svr, v);
            if (ref && s != *ref) {
              problems = "schemes disagree at one crop";
              return false;
            }
            ref = s;
          }
        }
        if (score_image(FusionConfig{FusionScheme::kFeatureConcat, PoolOp::kAvg, 1}, svr, v) != *ref) {
          problems = "concat disagrees at one crop";
          return false;
        }
      }
      return true;
    };

    const double alphabet[] = {-1.0, 0.5, 2.0};
    int exhaustive = 0;
    for (int len = 1; len <= 4; ++len) {
      LinearSVRModel svr;
      svr.feature_dim = len;
      for (int j = 0; j < len; ++j) svr.w.push_back(alphabet[j % 3] * (j + 1));
      svr.b = 3.0;
      for (int n = 1; n <= 3; ++n) {
        long total = 1;
        for (int k = 0; k < len * n; ++k) total *= 3;
        for (long code = 0; code < total; ++code) {
          std::vector<FeatureVector> v(n, FeatureVector(len));
          long c = code;
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < len; ++j, c /= 3) v[i][j] = alphabet[c % 3];
          if (!check(v, svr)) return {Status::kFail, "exhaustive case failed: " + problems};
          ++exhaustive;
        }
      }
    }

    Rng rng(derive_seed(105, "ac5"));
    for (int trial = 0; trial < 1000; ++trial) {
      const int len = 1 + static_cast<int>(rng.below(16));
      const int n = 1 + static_cast<int>(rng.below(6));
      std::vector<FeatureVector> v(n, FeatureVector(len));
      for (auto& x : v)
        for (auto& e : x) e = 200 * rng.uniform() - 100;
      LinearSVRModel svr;
      svr.feature_dim = len;
      for (int j = 0; j < len; ++j) svr.w.push_back(rng.normal());
      svr.b = rng.normal();
      if (!check(v, svr)) return {Status::kFail, "random case failed: " + problems};
      // n = 1 equivalence for the first crop of every random case.
      if (n > 1 && !check({v[0]}, svr)) return {Status::kFail, "random single-crop case failed: " + problems};
    }
    return {Status::kPass, std::to_string(exhaustive) + " exhaustive and 1000 random cases (" +
                               std::to_string(cases) + " checks) hold"};
  }

  // ---------------------------------------------------------------------------
  // AC-6

  Outcome svr_oracle() {
    Rng rng(derive_seed(106, "ac6"));
    double worst = 0.0;
    int logs = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 2 + static_cast<int>(rng.below(5));
      const int d = 1 + static_cast<int>(rng.below(2));
      std::vector<FeatureVector> X(n, FeatureVector(d));
      std::vector<double> y(n);
      for (int i = 0; i < n; ++i) {
        for (auto& x : X[i]) x = 4 * rng.uniform() - 2;
        y[i] = 1.5 * X[i][0] + 3 * rng.normal();
      }
      SVRConfig cfg;
      cfg.C = 0.1 + 4 * rng.uniform();
      cfg.epsilon = 0.6 * rng.uniform();
      cfg.tol = 1e-12;
      cfg.seed = static_cast<std::uint64_t>(trial);
      SolverLog log;
      const LinearSVRModel m = train_svr(X, y, cfg, &log);
      const oracle::SvrOptimum best = oracle::svr_brute_force(X, y, cfg.C, cfg.epsilon);
      const double got = oracle::svr_objective(m.w, m.b, X, y, cfg.C, cfg.epsilon);
      worst = std::max(worst, (got - best.objective) / std::max(best.objective, 1e-9));
      bool monotone = !log.dual_objective.empty();
      for (std::size_t p = 1; p < log.dual_objective.size(); ++p) {
        monotone = monotone && log.dual_objective[p] <= log.dual_objective[p - 1] + 1e-12;
      }
      if (!monotone) return {Status::kFail, "dual objective log not monotone on instance " + std::to_string(trial)};
      ++logs;
    }
    return {worst < 1e-4 ? Status::kPass : Status::kFail,
            "50 instances: worst objective gap " + fmt("%.2e", worst) + " relative (limit 1e-4); " +
                std::to_string(logs) + " monotone solver logs"};
  }

  // ---------------------------------------------------------------------------
  // AC-9

  Outcome live_features() {
    const char* features = std::getenv("BIQA_LIVE_FEATURES");
    const char* manifest = std::getenv("BIQA_LIVE_MANIFEST");
    if (!features || !manifest) return {Status::kSkip, "set BIQA_LIVE_FEATURES and BIQA_LIVE_MANIFEST to run"};
    std::ostringstream ini;
    ini << "[experiment]\nmanifest = " << manifest << "\nseed = 1\nfinal_model = false\n"
        << "[backbone]\nkind = precomputed\nfeatures = " << features << "\n[preprocess]\nmode = central-crop\n";
    ExperimentConfig cfg = parse_config(ini.str(), fs::current_path());
    cfg.jobs = jobs;
    const EvalReport r = run_experiment(cfg);
    const auto lcc = r.configs.at(0).median.lcc;
    const bool ok = lcc && std::fabs(*lcc - 0.7215) <= 0.05;
    return {ok ? Status::kPass : Status::kFail, "median LCC " + opt_text(lcc) + " (target 0.72 +- 0.05)"};
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biqa acceptance harness"};
  std::string work_dir;
  std::vector<std::string> only;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--work-dir", work_dir, "Scratch directory (default: a temporary directory)");
  app.add_option("--only", only, "Criteria to run, e.g. AC-1,AC-5")->delimiter(',');
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  std::optional<oracle::TempDir> temp;
  Harness h;
  if (work_dir.empty()) {
    temp.emplace("biqa-acceptance");
    h.work_dir = temp->path();
  } else {
    h.work_dir = work_dir;
    fs::create_directories(h.work_dir);
  }
  h.jobs = jobs;

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"AC-1", [&] { return h.metric_oracles(); }},       {"AC-2", [&] { return h.gradient_check(); }},
      {"AC-3", [&] { return h.end_to_end(); }},           {"AC-4", [&] { return h.trend(); }},
      {"AC-5", [&] { return h.fusion_algebra(); }},       {"AC-6", [&] { return h.svr_oracle(); }},
      {"AC-7", [&] { return h.determinism(); }},          {"AC-8", [&] { return h.sigma_coverage_check(); }},
      {"AC-9", [&] { return h.live_features(); }},
  };

  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "SKIP";
    if (o.status == Status::kFail) ++failures;
    std::cout << name << " " << tag << "  " << o.detail << " [" << fmt("%.1f", secs) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
