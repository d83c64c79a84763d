/*
 * Copyright 2026 The fsosr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fsosr/runner.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "fsosr/transforms.h"

namespace fsosr {
namespace {

using json = nlohmann::json;

void CheckKeys(const json& obj, const std::set<std::string>& allowed,
               const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("unknown config key '" + where + key + "'");
    }
  }
}

template <typename T>
void ReadIfPresent(const json& obj, const char* key, T* out,
                   const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    *out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + key + "': " + e.what());
  }
}

std::filesystem::path Resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

json SummaryJson(const MetricSummary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"ci95", s.ci95}};
}

uint64_t CombineChecksums(const std::vector<uint64_t>& sums) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const uint64_t s : sums) {
    for (int b = 0; b < 8; ++b) {
      h ^= (s >> (8 * b)) & 0xff;
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool NeedsBaseMean(const RunConfig& cfg) {
  for (const Method m : cfg.methods) {
    const CenteringKind kind =
        IsTransductive(m) ? cfg.ostim.centering : cfg.baseline.centering;
    if (kind == CenteringKind::kBase) return true;
  }
  return false;
}

// Rethrows `e` with the episode and method prepended, keeping its kind.
[[noreturn]] void RethrowWithContext(const std::exception_ptr& e,
                                     uint64_t index, Method method) {
  const std::string prefix = "episode " + std::to_string(index) + ", method " +
                             MethodName(method) + ": ";
  try {
    std::rethrow_exception(e);
  } catch (const DivergenceError& err) {
    throw DivergenceError(err.step(), prefix + err.what());
  } catch (const Error& err) {
    throw Error(err.kind(), prefix + err.what());
  } catch (const std::exception& err) {
    throw Error(ErrorKind::kData, prefix + err.what());
  }
}

}  // namespace

const char* MethodName(Method method) {
  switch (method) {
    case Method::kOstim:
      return "ostim";
    case Method::kTimClosed:
      return "tim_closed";
    case Method::kExplicitDummy:
      return "explicit_dummy";
    case Method::kSimpleShot:
      return "simpleshot";
    case Method::kKnn:
      return "knn";
    case Method::kStrongBaseline:
      return "strong_baseline";
  }
  return "?";
}

Method ParseMethod(const std::string& name) {
  for (const Method m :
       {Method::kOstim, Method::kTimClosed, Method::kExplicitDummy,
        Method::kSimpleShot, Method::kKnn, Method::kStrongBaseline}) {
    if (name == MethodName(m)) return m;
  }
  throw ConfigError("unknown method '" + name + "'");
}

bool IsTransductive(Method method) {
  return method == Method::kOstim || method == Method::kTimClosed ||
         method == Method::kExplicitDummy;
}

void RunConfig::Validate() const {
  episode.Validate();
  ostim.Validate();
  baseline.Validate();
  if (methods.empty()) throw ConfigError("methods must not be empty");
  if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  for (const Method m : methods) {
    if ((m == Method::kKnn || m == Method::kStrongBaseline) &&
        baseline.knn_k > episode.n_way * episode.n_shot) {
      throw ConfigError("baseline.knn_k exceeds the support set size");
    }
  }
}

RunConfig ParseRunConfig(const json& doc, const std::filesystem::path& base_dir) {
  CheckKeys(doc,
            {"store", "split", "n_episodes", "workers", "output_dir", "methods",
             "episode", "centering", "ostim", "baseline"},
            "");
  RunConfig cfg;
  std::string store;
  ReadIfPresent(doc, "store", &store, "");
  cfg.store = Resolve(base_dir, store);
  std::string output_dir;
  ReadIfPresent(doc, "output_dir", &output_dir, "");
  if (!output_dir.empty()) cfg.output_dir = Resolve(base_dir, output_dir);
  std::string split = "test";
  ReadIfPresent(doc, "split", &split, "");
  cfg.split = ParseSplit(split);
  ReadIfPresent(doc, "n_episodes", &cfg.n_episodes, "");
  ReadIfPresent(doc, "workers", &cfg.workers, "");

  std::vector<std::string> methods;
  ReadIfPresent(doc, "methods", &methods, "");
  for (const auto& m : methods) cfg.methods.push_back(ParseMethod(m));

  if (doc.contains("episode")) {
    const json& e = doc.at("episode");
    CheckKeys(e, {"n_way", "n_shot", "n_query_per_class", "n_open_classes", "seed"},
              "episode.");
    ReadIfPresent(e, "n_way", &cfg.episode.n_way, "episode.");
    ReadIfPresent(e, "n_shot", &cfg.episode.n_shot, "episode.");
    ReadIfPresent(e, "n_query_per_class", &cfg.episode.n_query_per_class,
                  "episode.");
    ReadIfPresent(e, "n_open_classes", &cfg.episode.n_open_classes, "episode.");
    ReadIfPresent(e, "seed", &cfg.episode.seed, "episode.");
  }
  if (doc.contains("ostim")) {
    const json& o = doc.at("ostim");
    CheckKeys(o, {"alpha", "n_steps", "lr", "temperature", "variant", "centering"},
              "ostim.");
    ReadIfPresent(o, "alpha", &cfg.ostim.alpha, "ostim.");
    ReadIfPresent(o, "n_steps", &cfg.ostim.n_steps, "ostim.");
    ReadIfPresent(o, "lr", &cfg.ostim.learning_rate, "ostim.");
    ReadIfPresent(o, "temperature", &cfg.ostim.temperature, "ostim.");
    std::string variant = VariantName(cfg.ostim_variant);
    ReadIfPresent(o, "variant", &variant, "ostim.");
    cfg.ostim_variant = ParseVariant(variant);
    std::string centering = CenteringName(cfg.ostim.centering);
    ReadIfPresent(o, "centering", &centering, "ostim.");
    cfg.ostim.centering = ParseCentering(centering);
  }
  if (doc.contains("baseline")) {
    const json& b = doc.at("baseline");
    CheckKeys(b, {"knn_k", "temperature", "centering"}, "baseline.");
    ReadIfPresent(b, "knn_k", &cfg.baseline.knn_k, "baseline.");
    ReadIfPresent(b, "temperature", &cfg.baseline.softmax_temperature,
                  "baseline.");
    std::string centering = CenteringName(cfg.baseline.centering);
    ReadIfPresent(b, "centering", &centering, "baseline.");
    cfg.baseline.centering = ParseCentering(centering);
  }
  if (doc.contains("centering")) {
    std::string centering;
    ReadIfPresent(doc, "centering", &centering, "");
    cfg.ostim.centering = cfg.baseline.centering = ParseCentering(centering);
  }
  cfg.Validate();
  return cfg;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return ParseRunConfig(doc, path.parent_path());
}

json ConfigSnapshot(const RunConfig& cfg) {
  json methods = json::array();
  for (const Method m : cfg.methods) methods.push_back(MethodName(m));
  return {
      {"split", SplitName(cfg.split)},
      {"n_episodes", cfg.n_episodes},
      {"methods", methods},
      {"episode",
       {{"n_way", cfg.episode.n_way},
        {"n_shot", cfg.episode.n_shot},
        {"n_query_per_class", cfg.episode.n_query_per_class},
        {"n_open_classes", cfg.episode.n_open_classes},
        {"seed", cfg.episode.seed}}},
      {"ostim",
       {{"alpha", cfg.ostim.alpha},
        {"n_steps", cfg.ostim.n_steps},
        {"lr", cfg.ostim.learning_rate},
        {"temperature", cfg.ostim.temperature},
        {"variant", VariantName(cfg.ostim_variant)},
        {"centering", CenteringName(cfg.ostim.centering)}}},
      {"baseline",
       {{"knn_k", cfg.baseline.knn_k},
        {"temperature", cfg.baseline.softmax_temperature},
        {"centering", CenteringName(cfg.baseline.centering)}}},
  };
}

PredictionSheet RunMethod(Method method, const Episode& episode,
                          const RunConfig& cfg,
                          const std::optional<Vector>& base_mean) {
  CenteringPolicy baseline_policy{cfg.baseline.centering, std::nullopt};
  if (cfg.baseline.centering == CenteringKind::kBase) {
    baseline_policy.mu = base_mean;
  }
  switch (method) {
    case Method::kOstim:
      return RunTransductive(episode, cfg.ostim_variant, cfg.ostim, base_mean);
    case Method::kTimClosed:
      return RunTransductive(episode, Variant::kTimClosed, cfg.ostim,
                             base_mean);
    case Method::kExplicitDummy:
      return RunTransductive(episode, Variant::kExplicitDummy, cfg.ostim,
                             base_mean);
    case Method::kSimpleShot:
      return SimpleShotClassify(episode, baseline_policy,
                                cfg.baseline.softmax_temperature);
    case Method::kKnn: {
      PredictionSheet sheet;
      sheet.n_way = episode.n_way;
      sheet.outlier_score =
          KnnOutlierScore(episode, baseline_policy, cfg.baseline.knn_k);
      return sheet;
    }
    case Method::kStrongBaseline:
      return StrongBaseline(episode, baseline_policy, cfg.baseline);
  }
  throw ConfigError("unhandled method");
}

RunResult Run(const RunConfig& cfg, const FeatureSet& fs) {
  cfg.Validate();
  std::optional<Vector> base_mean;
  if (NeedsBaseMean(cfg)) base_mean = BaseMean(fs);

  const size_t n = static_cast<size_t>(cfg.n_episodes);
  const size_t n_methods = cfg.methods.size();
  // reports[e * n_methods + m]
  std::vector<EpisodeReport> reports(n * n_methods);
  std::vector<uint64_t> checksums(n);
  std::vector<std::exception_ptr> errors(n);
  std::vector<int> failed_method(n, -1);

  auto evaluate = [&](size_t e) {
    int m = -1;
    try {
      const Episode episode = SampleEpisode(fs, cfg.episode, e, cfg.split);
      checksums[e] = episode.Checksum();
      for (m = 0; m < static_cast<int>(n_methods); ++m) {
        const Method method = cfg.methods[m];
        const PredictionSheet sheet = RunMethod(method, episode, cfg, base_mean);
        reports[e * n_methods + m] = ScoreEpisode(
            sheet, episode.query_truth, method != Method::kKnn);
      }
    } catch (...) {
      errors[e] = std::current_exception();
      failed_method[e] = m;
    }
  };

  const size_t workers = std::min<size_t>(static_cast<size_t>(cfg.workers), n);
  if (workers <= 1) {
    for (size_t e = 0; e < n; ++e) evaluate(e);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (size_t e = next++; e < n; e = next++) evaluate(e);
      });
    }
    for (auto& t : pool) t.join();
  }

  for (size_t e = 0; e < n; ++e) {
    if (!errors[e]) continue;
    if (failed_method[e] < 0) {
      // Sampling failed before any method ran.
      std::rethrow_exception(errors[e]);
    }
    RethrowWithContext(errors[e], e, cfg.methods[failed_method[e]]);
  }

  RunResult result;
  result.episode_checksums = checksums;
  for (size_t m = 0; m < n_methods; ++m) {
    MethodResult mr;
    mr.method = cfg.methods[m];
    for (size_t e = 0; e < n; ++e) {
      mr.episodes.push_back(reports[e * n_methods + m]);
      mr.episode_checksums.push_back(checksums[e]);
    }
    mr.report = Aggregate(mr.episodes);
    result.methods.push_back(std::move(mr));
  }
  return result;
}

json RunReportJson(const RunConfig& cfg, const RunResult& result) {
  json methods = json::array();
  for (const MethodResult& mr : result.methods) {
    const RunReport& r = mr.report;
    methods.push_back({
        {"method", MethodName(mr.method)},
        {"shot", cfg.episode.n_shot},
        {"n_episodes", r.n_episodes},
        {"acc", r.acc ? SummaryJson(*r.acc) : json(nullptr)},
        {"auroc", SummaryJson(r.auroc)},
        {"aupr", SummaryJson(r.aupr)},
        {"prec_at_90", SummaryJson(r.prec_at_90)},
        {"episode_stream_checksum", Hex(CombineChecksums(mr.episode_checksums))},
    });
  }
  return {
      {"config", ConfigSnapshot(cfg)},
      {"n_episodes", cfg.n_episodes},
      {"episode_stream_checksum", Hex(CombineChecksums(result.episode_checksums))},
      {"methods", methods},
  };
}

std::string RunReportCsv(const RunConfig& cfg, const RunResult& result) {
  std::ostringstream out;
  out << "method,shot,acc,acc_ci95,auroc,auroc_ci95,aupr,aupr_ci95,"
         "prec_at_90,prec_at_90_ci95\n";
  char buf[64];
  auto put = [&](const MetricSummary& s) {
    std::snprintf(buf, sizeof(buf), ",%.2f,%.2f", 100.0 * s.mean,
                  100.0 * s.ci95);
    out << buf;
  };
  for (const MethodResult& mr : result.methods) {
    out << MethodName(mr.method) << "," << cfg.episode.n_shot;
    if (mr.report.acc) {
      put(*mr.report.acc);
    } else {
      out << ",,";
    }
    put(mr.report.auroc);
    put(mr.report.aupr);
    put(mr.report.prec_at_90);
    out << "\n";
  }
  return out.str();
}

void WriteRunReports(const RunConfig& cfg, const RunResult& result) {
  std::filesystem::create_directories(cfg.output_dir);
  const auto json_path = cfg.output_dir / "run_report.json";
  std::ofstream js(json_path, std::ios::trunc);
  js << RunReportJson(cfg, result).dump(2) << "\n";
  std::ofstream csv(cfg.output_dir / "run_report.csv", std::ios::trunc);
  csv << RunReportCsv(cfg, result);
  if (!js || !csv) {
    throw DataError("failed writing reports to " + cfg.output_dir.string());
  }
}

void ApplyParam(RunConfig& cfg, const std::string& param, double value) {
  if (param == "ostim.alpha") {
    cfg.ostim.alpha = value;
  } else if (param == "ostim.lr") {
    cfg.ostim.learning_rate = value;
  } else if (param == "ostim.n_steps") {
    cfg.ostim.n_steps = static_cast<int>(value);
  } else if (param == "ostim.temperature") {
    cfg.ostim.temperature = value;
  } else if (param == "baseline.knn_k") {
    cfg.baseline.knn_k = static_cast<int>(value);
  } else if (param == "baseline.temperature") {
    cfg.baseline.softmax_temperature = value;
  } else {
    throw ConfigError("cannot sweep unknown parameter '" + param + "'");
  }
}

double SelectionValue(const RunReport& report, const std::string& metric) {
  if (metric == "auroc") return report.auroc.mean;
  if (metric == "aupr") return report.aupr.mean;
  if (metric == "prec_at_90") return report.prec_at_90.mean;
  if (metric == "acc") {
    if (!report.acc) throw ConfigError("method reports no accuracy");
    return report.acc->mean;
  }
  throw ConfigError("unknown selection metric '" + metric + "'");
}

SweepResult Sweep(const RunConfig& cfg, const FeatureSet& fs,
                  const std::string& param, const std::vector<double>& grid,
                  const std::string& metric) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  if (cfg.methods.empty()) throw ConfigError("methods must not be empty");
  if (metric != "auroc" && metric != "aupr" && metric != "prec_at_90" &&
      metric != "acc") {
    throw ConfigError("unknown selection metric '" + metric + "'");
  }
  SweepResult out;
  out.param = param;
  out.metric = metric;
  out.method = cfg.methods.front();
  double best = 0.0;
  for (const double value : grid) {
    RunConfig trial = cfg;
    trial.split = Split::kVal;
    trial.methods = {out.method};
    ApplyParam(trial, param, value);
    const RunResult r = Run(trial, fs);
    const RunReport& report = r.methods.front().report;
    out.rows.push_back({value, report});
    const double score = SelectionValue(report, metric);
    if (out.rows.size() == 1 || score > best ||
        (score == best && value < out.best_value)) {
      best = score;
      out.best_value = value;
    }
  }
  return out;
}

json SweepReportJson(const SweepResult& sweep) {
  json rows = json::array();
  for (const SweepRow& row : sweep.rows) {
    rows.push_back({{"value", row.value},
                    {"acc", row.report.acc ? SummaryJson(*row.report.acc)
                                           : json(nullptr)},
                    {"auroc", SummaryJson(row.report.auroc)},
                    {"aupr", SummaryJson(row.report.aupr)},
                    {"prec_at_90", SummaryJson(row.report.prec_at_90)}});
  }
  return {{"param", sweep.param},
          {"method", MethodName(sweep.method)},
          {"selection_metric", sweep.metric},
          {"best", sweep.best_value},
          {"rows", rows}};
}

json EpisodeJson(const Episode& episode) {
  auto rows_of = [](const Matrix& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<double> row(m.cols());
      for (Eigen::Index d = 0; d < m.cols(); ++d) row[d] = m(i, d);
      out.push_back(row);
    }
    return out;
  };
  json truth = json::array();
  for (const int t : episode.query_truth) {
    truth.push_back(t == kOutlier ? json("outlier") : json(t));
  }
  return {{"n_way", episode.n_way},
          {"source_classes", episode.source_classes},
          {"support_rows", episode.support_rows},
          {"support_labels", episode.support_labels},
          {"support", rows_of(episode.support)},
          {"query_rows", episode.query_rows},
          {"query_truth", truth},
          {"query", rows_of(episode.query)},
          {"checksum", Hex(episode.Checksum())}};
}

}  // namespace fsosr
