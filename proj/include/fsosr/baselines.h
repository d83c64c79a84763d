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

#ifndef FSOSR_BASELINES_H_
#define FSOSR_BASELINES_H_

#include <vector>

#include "fsosr/prediction.h"
#include "fsosr/transforms.h"

namespace fsosr {

struct BaselineConfig {
  int knn_k = 1;
  double softmax_temperature = 10.0;
  CenteringKind centering = CenteringKind::kBase;

  void Validate() const;
};

// Nearest-centroid classifier on center-normalized features. Centroids are
// re-normalized; logits are temperature-scaled cosines. Outlierness is the
// negative maximum probability.
PredictionSheet SimpleShotClassify(const Episode& episode,
                                   const CenteringPolicy& policy,
                                   double temperature);

// Mean Euclidean distance from each normalized query to its k nearest
// normalized support vectors.
std::vector<double> KnnOutlierScore(const Episode& episode,
                                    const CenteringPolicy& policy, int k);

// SimpleShot closed-set predictions with k-NN outlier scores.
PredictionSheet StrongBaseline(const Episode& episode,
                               const CenteringPolicy& policy,
                               const BaselineConfig& cfg);

}  // namespace fsosr

#endif  // FSOSR_BASELINES_H_
