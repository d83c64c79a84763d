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

#ifndef FSOSR_PREDICTION_H_
#define FSOSR_PREDICTION_H_

#include <vector>

#include "fsosr/episode_sampler.h"

namespace fsosr {

// Per-query output of any method. `probs` has K columns for closed-set
// methods and K+1 for open-set ones (last column = outlier class).
struct PredictionSheet {
  int n_way = 0;
  Matrix probs;
  // Higher means more likely to be an outlier.
  std::vector<double> outlier_score;
  // Argmax over the first n_way columns, ties to the lowest index.
  std::vector<int> closed_pred;
};

// Row-wise numerically stable softmax.
Matrix SoftmaxRows(const Matrix& logits);

// Fills closed_pred from the first n_way columns of probs.
void FillClosedPredictions(PredictionSheet& sheet);

// Entropy of each query's distribution restricted to the first K columns and
// renormalized.
std::vector<double> ClosedSetEntropy(const PredictionSheet& sheet);

}  // namespace fsosr

#endif  // FSOSR_PREDICTION_H_
