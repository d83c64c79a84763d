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

#ifndef FSOSR_EPISODE_SAMPLER_H_
#define FSOSR_EPISODE_SAMPLER_H_

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "fsosr/feature_store.h"

namespace fsosr {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct EpisodeSpec {
  int n_way = 5;
  int n_shot = 1;
  int n_query_per_class = 15;
  int n_open_classes = 5;
  uint64_t seed = 0;

  // Throws ConfigError when a field is out of range.
  void Validate() const;
};

// Marker in Episode::query_truth for open-set queries.
inline constexpr int kOutlier = -1;

// One few-shot open-set task. Support is grouped by class (n_shot rows per
// class, class 0 first); queries are grouped the same way, closed-set classes
// first and open-set classes after.
struct Episode {
  int n_way = 0;
  Matrix support;
  std::vector<int> support_labels;
  Matrix query;
  // Closed-set label in [0, K) or kOutlier.
  std::vector<int> query_truth;

  // Provenance: source class ids (first K closed-set, rest open-set) and the
  // FeatureSet row of every support/query vector.
  std::vector<int> source_classes;
  std::vector<int64_t> support_rows;
  std::vector<int64_t> query_rows;

  int dim() const { return static_cast<int>(support.cols()); }
  int n_support() const { return static_cast<int>(support.rows()); }
  int n_query() const { return static_cast<int>(query.rows()); }
  std::vector<bool> OutlierMask() const;
  int NumInliers() const;

  // 64-bit FNV-1a over the episode's rows and labels; used to check that
  // several methods saw the same task.
  uint64_t Checksum() const;

};

// Samples episode `episode_index` of the stream keyed by spec.seed. The result
// is a pure function of (fs, spec, episode_index, split).
Episode SampleEpisode(const FeatureSet& fs, const EpisodeSpec& spec,
                      uint64_t episode_index, Split split = Split::kTest);

}  // namespace fsosr

#endif  // FSOSR_EPISODE_SAMPLER_H_
