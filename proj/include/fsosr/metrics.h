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

#ifndef FSOSR_METRICS_H_
#define FSOSR_METRICS_H_

#include <optional>
#include <span>
#include <vector>

#include "fsosr/prediction.h"

namespace fsosr {

// Outliers are the positive class throughout; higher scores mean "more
// outlying".

// Fraction of inlier queries whose closed-set prediction is correct. Throws
// DataError if there are no inliers.
double Accuracy(std::span<const int> closed_pred, std::span<const int> truth);

// Mann-Whitney statistic with midranks: P(s_out > s_in) + P(s_out == s_in)/2.
// Needs at least one inlier and one outlier.
double Auroc(std::span<const double> scores, const std::vector<bool>& is_outlier);

// Step-interpolated average precision. Tied scores enter the sweep together.
double Aupr(std::span<const double> scores, const std::vector<bool>& is_outlier);

// Best precision over the descending-score thresholds whose recall reaches
// target_recall.
double PrecisionAtRecall(std::span<const double> scores,
                         const std::vector<bool>& is_outlier,
                         double target_recall = 0.9);

struct EpisodeReport {
  std::optional<double> acc;  // absent for detectors without a classifier
  double auroc = 0.0;
  double aupr = 0.0;
  double prec_at_90 = 0.0;
};

// Scores one sheet against an episode's ground truth. `with_accuracy` is false
// for pure detectors.
EpisodeReport ScoreEpisode(const PredictionSheet& sheet,
                           const std::vector<int>& query_truth,
                           bool with_accuracy = true);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;   // sample standard deviation; 0 for one episode
  double ci95 = 0.0;  // 1.96 * std / sqrt(n)
};

struct RunReport {
  int n_episodes = 0;
  std::optional<MetricSummary> acc;
  MetricSummary auroc;
  MetricSummary aupr;
  MetricSummary prec_at_90;
};

// Throws DataError on an empty list.
RunReport Aggregate(std::span<const EpisodeReport> reports);

MetricSummary Summarize(std::span<const double> values);

}  // namespace fsosr

#endif  // FSOSR_METRICS_H_
