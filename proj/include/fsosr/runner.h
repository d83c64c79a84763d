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

#ifndef FSOSR_RUNNER_H_
#define FSOSR_RUNNER_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsosr/baselines.h"
#include "fsosr/episode_sampler.h"
#include "fsosr/feature_store.h"
#include "fsosr/metrics.h"
#include "fsosr/ostim.h"

namespace fsosr {

enum class Method {
  kOstim,
  kTimClosed,
  kExplicitDummy,
  kSimpleShot,
  kKnn,
  kStrongBaseline,
};

const char* MethodName(Method method);
Method ParseMethod(const std::string& name);
bool IsTransductive(Method method);

struct RunConfig {
  std::filesystem::path store;
  EpisodeSpec episode;
  std::vector<Method> methods;
  OstimConfig ostim;
  // Variant used by the "ostim" method; tim_closed and explicit_dummy fix
  // their own.
  Variant ostim_variant = Variant::kOstimImplicit;
  BaselineConfig baseline;
  int n_episodes = 600;
  Split split = Split::kTest;
  int workers = 1;
  std::filesystem::path output_dir = ".";

  void Validate() const;
};

// Parses the JSON config document. Unknown keys are rejected. Relative store
// and output paths are resolved against `base_dir`.
RunConfig ParseRunConfig(const nlohmann::json& doc,
                         const std::filesystem::path& base_dir = {});
RunConfig LoadRunConfig(const std::filesystem::path& path);

// Everything that determines the numbers in a report. Worker count and
// output paths are excluded so reports do not depend on them.
nlohmann::json ConfigSnapshot(const RunConfig& cfg);

struct MethodResult {
  Method method;
  std::vector<EpisodeReport> episodes;
  // Episode::Checksum() of every episode this method was scored on.
  std::vector<uint64_t> episode_checksums;
  RunReport report;
};

struct RunResult {
  std::vector<MethodResult> methods;
  std::vector<uint64_t> episode_checksums;
};

// Evaluates one method on one episode.
PredictionSheet RunMethod(Method method, const Episode& episode,
                          const RunConfig& cfg,
                          const std::optional<Vector>& base_mean);

// Scores every configured method on the same stream of episodes. Results are
// reduced in episode order, so they do not depend on cfg.workers.
RunResult Run(const RunConfig& cfg, const FeatureSet& fs);

nlohmann::json RunReportJson(const RunConfig& cfg, const RunResult& result);
std::string RunReportCsv(const RunConfig& cfg, const RunResult& result);
// Writes run_report.json and run_report.csv into cfg.output_dir.
void WriteRunReports(const RunConfig& cfg, const RunResult& result);

struct SweepRow {
  double value = 0.0;
  RunReport report;
};

struct SweepResult {
  std::string param;
  std::string metric = "auroc";
  Method method = Method::kOstim;
  std::vector<SweepRow> rows;
  double best_value = 0.0;
};

// Sets a numeric hyper-parameter by its config key ("ostim.alpha",
// "ostim.lr", "ostim.n_steps", "ostim.temperature", "baseline.knn_k",
// "baseline.temperature").
void ApplyParam(RunConfig& cfg, const std::string& param, double value);

// Mean of `metric` ("auroc", "aupr", "prec_at_90" or "acc") in a report.
double SelectionValue(const RunReport& report, const std::string& metric);

// Evaluates the first configured method on validation-split episodes for each
// grid value and keeps the one with the highest mean `metric`; ties go to the
// smaller value.
SweepResult Sweep(const RunConfig& cfg, const FeatureSet& fs,
                  const std::string& param, const std::vector<double>& grid,
                  const std::string& metric = "auroc");

inline SweepResult SweepAlpha(const RunConfig& cfg, const FeatureSet& fs,
                              const std::vector<double>& grid) {
  return Sweep(cfg, fs, "ostim.alpha", grid);
}

nlohmann::json SweepReportJson(const SweepResult& sweep);

nlohmann::json EpisodeJson(const Episode& episode);

}  // namespace fsosr

#endif  // FSOSR_RUNNER_H_
