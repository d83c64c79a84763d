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

// fsosr: few-shot open-set recognition on pre-extracted features.
//
//   fsosr ingest   --csv rows.csv --splits splits.json --out store.fsos
//   fsosr synth    --spec synth.json --out store.fsos
//   fsosr sample   --store store.fsos --spec episode.json --n 5 --dump dir/
//   fsosr diagnose --store store.fsos --split test --out report.json
//   fsosr run      --config run.json
//   fsosr sweep    --config run.json --param ostim.alpha --grid 0.1,0.5,1.0

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fsosr/diagnostics.h"
#include "fsosr/episode_sampler.h"
#include "fsosr/error.h"
#include "fsosr/feature_store.h"
#include "fsosr/runner.h"
#include "fsosr/synthgen.h"

namespace {

using json = nlohmann::json;
using namespace fsosr;

json ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void WriteJson(const std::filesystem::path& path, const json& doc) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(2) << "\n";
  if (!out) throw DataError("failed writing " + path.string());
}

template <typename T>
void Take(const json& doc, const char* key, T* out) {
  if (!doc.contains(key)) return;
  try {
    *out = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("key '") + key + "': " + e.what());
  }
}

SynthSpec ParseSynthSpec(const json& doc) {
  SynthSpec spec;
  Take(doc, "dim", &spec.dim);
  Take(doc, "n_classes", &spec.n_classes);
  Take(doc, "points_per_class", &spec.points_per_class);
  Take(doc, "centroid_radius", &spec.centroid_radius);
  Take(doc, "within_std", &spec.within_std);
  Take(doc, "global_shift", &spec.global_shift);
  Take(doc, "seed", &spec.seed);
  if (doc.contains("split_fractions")) {
    const json& f = doc.at("split_fractions");
    Take(f, "base", &spec.base_fraction);
    Take(f, "val", &spec.val_fraction);
    Take(f, "test", &spec.test_fraction);
  }
  return spec;
}

EpisodeSpec ParseEpisodeSpec(const json& doc) {
  EpisodeSpec spec;
  Take(doc, "n_way", &spec.n_way);
  Take(doc, "n_shot", &spec.n_shot);
  Take(doc, "n_query_per_class", &spec.n_query_per_class);
  Take(doc, "n_open_classes", &spec.n_open_classes);
  Take(doc, "seed", &spec.seed);
  spec.Validate();
  return spec;
}

std::vector<double> ParseGrid(const std::string& text) {
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      grid.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad grid value '" + item + "'");
    }
  }
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  return grid;
}

void PrintRunSummary(const RunResult& result) {
  for (const MethodResult& mr : result.methods) {
    const RunReport& r = mr.report;
    std::printf("%-16s acc=%s auroc=%.2f aupr=%.2f prec@0.9=%.2f\n",
                MethodName(mr.method),
                r.acc ? std::to_string(100.0 * r.acc->mean).substr(0, 5).c_str()
                      : "  -  ",
                100.0 * r.auroc.mean, 100.0 * r.aupr.mean,
                100.0 * r.prec_at_90.mean);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot open-set recognition toolkit"};
  app.require_subcommand(1);

  std::string csv, splits, out, store, spec_path, dump_dir, split_name = "test",
              config, param = "ostim.alpha", grid_text, metric = "auroc";
  int n_episodes = 5;

  auto* ingest = app.add_subcommand("ingest", "Convert CSV rows to a store");
  ingest->add_option("--csv", csv, "label,f0,...,f{D-1} rows")->required();
  ingest->add_option("--splits", splits, "JSON with class_names and splits")
      ->required();
  ingest->add_option("--out", out, "Output store path")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic store");
  synth->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
  synth->add_option("--out", out, "Output store path")->required();

  auto* sample = app.add_subcommand("sample", "Dump episodes as JSON");
  sample->add_option("--store", store)->required();
  sample->add_option("--spec", spec_path, "Episode spec JSON")->required();
  sample->add_option("--n", n_episodes, "Number of episodes");
  sample->add_option("--split", split_name);
  sample->add_option("--dump", dump_dir, "Output directory")->required();

  auto* diagnose = app.add_subcommand("diagnose", "MIF and variance ratio");
  diagnose->add_option("--store", store)->required();
  diagnose->add_option("--split", split_name);
  diagnose->add_option("--out", out, "Report JSON path")->required();

  auto* run = app.add_subcommand("run", "Evaluate methods on episodes");
  run->add_option("--config", config)->required();

  auto* sweep = app.add_subcommand("sweep", "Validation sweep of one parameter");
  sweep->add_option("--config", config)->required();
  sweep->add_option("--param", param);
  sweep->add_option("--grid", grid_text)->required();
  sweep->add_option("--metric", metric, "auroc, aupr, prec_at_90 or acc");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      SaveFeatureStore(IngestCsv(csv, splits), out);
    } else if (*synth) {
      SaveFeatureStore(Generate(ParseSynthSpec(ReadJson(spec_path))), out);
    } else if (*sample) {
      const FeatureSet fs = LoadFeatureStore(store);
      const EpisodeSpec spec = ParseEpisodeSpec(ReadJson(spec_path));
      const Split split = ParseSplit(split_name);
      for (int i = 0; i < n_episodes; ++i) {
        const Episode ep = SampleEpisode(fs, spec, i, split);
        WriteJson(std::filesystem::path(dump_dir) /
                      ("episode_" + std::to_string(i) + ".json"),
                  EpisodeJson(ep));
      }
    } else if (*diagnose) {
      const FeatureSet fs = LoadFeatureStore(store);
      const DiagnosticReport report = Diagnose(fs, ParseSplit(split_name));
      json per_class = json::array();
      for (const ClassImposture& c : report.per_class) {
        per_class.push_back({{"class_id", c.class_id},
                             {"class_name", fs.class_names()[c.class_id]},
                             {"mean_if_percent", 100.0 * c.mean_if}});
      }
      WriteJson(out, {{"split", split_name},
                      {"mif_percent", 100.0 * report.mif},
                      {"rho", report.rho},
                      {"per_class", per_class}});
      std::printf("%s: MIF=%.2f%% rho=%.4f\n", split_name.c_str(),
                  100.0 * report.mif, report.rho);
    } else if (*run) {
      const RunConfig cfg = LoadRunConfig(config);
      const RunResult result = Run(cfg, LoadFeatureStore(cfg.store));
      WriteRunReports(cfg, result);
      PrintRunSummary(result);
    } else if (*sweep) {
      const RunConfig cfg = LoadRunConfig(config);
      const SweepResult result =
          Sweep(cfg, LoadFeatureStore(cfg.store), param, ParseGrid(grid_text),
                metric);
      WriteJson(cfg.output_dir / "sweep_report.json", SweepReportJson(result));
      for (const SweepRow& row : result.rows) {
        std::printf("%s=%g %s=%.2f\n", param.c_str(), row.value,
                    metric.c_str(),
                    100.0 * SelectionValue(row.report, metric));
      }
      std::printf("best %s=%g\n", param.c_str(), result.best_value);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "fsosr: %s\n", e.what());
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fsosr: %s\n", e.what());
    return 1;
  }
  return 0;
}
