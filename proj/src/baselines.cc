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

#include "fsosr/baselines.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace fsosr {

void BaselineConfig::Validate() const {
  if (knn_k < 1) throw ConfigError("baseline.knn_k must be >= 1");
  if (!(softmax_temperature > 0.0)) {
    throw ConfigError("baseline.temperature must be positive");
  }
}

PredictionSheet SimpleShotClassify(const Episode& episode,
                                   const CenteringPolicy& policy,
                                   double temperature) {
  const Vector mu = policy.Resolve(episode);
  const Matrix support = CenterNormalizeRows(episode.support, mu);
  const Matrix query = CenterNormalizeRows(episode.query, mu);
  const int k = episode.n_way;

  Matrix centroids = Matrix::Zero(k, episode.dim());
  std::vector<int> counts(k, 0);
  for (int i = 0; i < episode.n_support(); ++i) {
    centroids.row(episode.support_labels[i]) += support.row(i);
    ++counts[episode.support_labels[i]];
  }
  for (int c = 0; c < k; ++c) {
    // Zero-centered centroid of normalized vectors, itself re-normalized.
    centroids.row(c) =
        CenterNormalize(centroids.row(c).transpose() / counts[c],
                        Vector::Zero(episode.dim()))
            .transpose();
  }

  PredictionSheet sheet;
  sheet.n_way = k;
  sheet.probs = SoftmaxRows(temperature * query * centroids.transpose());
  sheet.outlier_score.resize(query.rows());
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    sheet.outlier_score[i] = -sheet.probs.row(i).maxCoeff();
  }
  FillClosedPredictions(sheet);
  return sheet;
}

std::vector<double> KnnOutlierScore(const Episode& episode,
                                    const CenteringPolicy& policy, int k) {
  if (k < 1 || k > episode.n_support()) {
    throw ConfigError("knn k=" + std::to_string(k) + " outside [1, " +
                      std::to_string(episode.n_support()) + "]");
  }
  const Vector mu = policy.Resolve(episode);
  const Matrix support = CenterNormalizeRows(episode.support, mu);
  const Matrix query = CenterNormalizeRows(episode.query, mu);

  std::vector<double> scores(query.rows());
  std::vector<double> dist(support.rows());
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    for (Eigen::Index j = 0; j < support.rows(); ++j) {
      dist[j] = (query.row(i) - support.row(j)).norm();
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += dist[j];
    scores[i] = sum / k;
  }
  return scores;
}

PredictionSheet StrongBaseline(const Episode& episode,
                               const CenteringPolicy& policy,
                               const BaselineConfig& cfg) {
  PredictionSheet sheet =
      SimpleShotClassify(episode, policy, cfg.softmax_temperature);
  sheet.outlier_score = KnnOutlierScore(episode, policy, cfg.knn_k);
  return sheet;
}

}  // namespace fsosr
