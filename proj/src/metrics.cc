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

#include "fsosr/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fsosr/error.h"

namespace fsosr {
namespace {

struct Counts {
  int64_t positives = 0;
  int64_t negatives = 0;
};

Counts CountClasses(std::span<const double> scores,
                    const std::vector<bool>& is_outlier) {
  if (scores.size() != is_outlier.size()) {
    throw DataError("scores and labels differ in length");
  }
  Counts c;
  for (const bool b : is_outlier) (b ? c.positives : c.negatives)++;
  return c;
}

// Indices sorted by descending score; ties keep input order.
std::vector<size_t> DescendingOrder(std::span<const double> scores) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

// Calls fn(tp, fp) at the end of every block of equal scores, walking from
// the highest score down.
template <typename Fn>
void SweepBlocks(std::span<const double> scores,
                 const std::vector<bool>& is_outlier, Fn fn) {
  const std::vector<size_t> order = DescendingOrder(scores);
  int64_t tp = 0;
  int64_t fp = 0;
  for (size_t i = 0; i < order.size(); ++i) {
    (is_outlier[order[i]] ? tp : fp)++;
    if (i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]]) {
      fn(tp, fp);
    }
  }
}

}  // namespace

double Accuracy(std::span<const int> closed_pred, std::span<const int> truth) {
  if (closed_pred.size() != truth.size()) {
    throw DataError("predictions and truth differ in length");
  }
  int64_t inliers = 0;
  int64_t correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == kOutlier) continue;
    ++inliers;
    correct += closed_pred[i] == truth[i];
  }
  if (inliers == 0) throw DataError("accuracy needs at least one inlier");
  return static_cast<double>(correct) / static_cast<double>(inliers);
}

double Auroc(std::span<const double> scores,
             const std::vector<bool>& is_outlier) {
  const Counts c = CountClasses(scores, is_outlier);
  if (c.positives == 0 || c.negatives == 0) {
    throw DataError("AUROC needs at least one inlier and one outlier");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Twice the midrank sum of the positives stays an exact integer.
  int64_t twice_rank_sum = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) {
      ++j;
    }
    // Ranks i+1 .. j+1 share the midrank (i + j + 2) / 2.
    const int64_t twice_midrank = static_cast<int64_t>(i + j + 2);
    for (size_t t = i; t <= j; ++t) {
      if (is_outlier[order[t]]) twice_rank_sum += twice_midrank;
    }
    i = j + 1;
  }
  const int64_t twice_u = twice_rank_sum - c.positives * (c.positives + 1);
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(c.positives) *
          static_cast<double>(c.negatives));
}

double Aupr(std::span<const double> scores,
            const std::vector<bool>& is_outlier) {
  const Counts c = CountClasses(scores, is_outlier);
  if (c.positives == 0) throw DataError("AUPR needs at least one outlier");
  const double positives = static_cast<double>(c.positives);
  double ap = 0.0;
  int64_t prev_tp = 0;
  SweepBlocks(scores, is_outlier, [&](int64_t tp, int64_t fp) {
    if (tp == prev_tp) return;
    const double precision =
        static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (static_cast<double>(tp - prev_tp) / positives) * precision;
    prev_tp = tp;
  });
  return ap;
}

double PrecisionAtRecall(std::span<const double> scores,
                         const std::vector<bool>& is_outlier,
                         double target_recall) {
  const Counts c = CountClasses(scores, is_outlier);
  if (c.positives == 0) {
    throw DataError("precision at recall needs at least one outlier");
  }
  const double positives = static_cast<double>(c.positives);
  double best = 0.0;
  SweepBlocks(scores, is_outlier, [&](int64_t tp, int64_t fp) {
    if (static_cast<double>(tp) / positives >= target_recall) {
      best = std::max(best, static_cast<double>(tp) /
                                static_cast<double>(tp + fp));
    }
  });
  return best;
}

EpisodeReport ScoreEpisode(const PredictionSheet& sheet,
                           const std::vector<int>& query_truth,
                           bool with_accuracy) {
  std::vector<bool> is_outlier(query_truth.size());
  for (size_t i = 0; i < query_truth.size(); ++i) {
    is_outlier[i] = query_truth[i] == kOutlier;
  }
  EpisodeReport r;
  if (with_accuracy) r.acc = Accuracy(sheet.closed_pred, query_truth);
  r.auroc = Auroc(sheet.outlier_score, is_outlier);
  r.aupr = Aupr(sheet.outlier_score, is_outlier);
  r.prec_at_90 = PrecisionAtRecall(sheet.outlier_score, is_outlier, 0.9);
  return r;
}

MetricSummary Summarize(std::span<const double> values) {
  if (values.empty()) throw DataError("cannot summarize zero values");
  const double n = static_cast<double>(values.size());
  MetricSummary s;
  for (const double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  s.ci95 = 1.96 * s.std / std::sqrt(n);
  return s;
}

RunReport Aggregate(std::span<const EpisodeReport> reports) {
  if (reports.empty()) throw DataError("cannot aggregate zero episodes");
  RunReport out;
  out.n_episodes = static_cast<int>(reports.size());
  std::vector<double> acc, auroc, aupr, prec;
  for (const EpisodeReport& r : reports) {
    if (r.acc.has_value()) acc.push_back(*r.acc);
    auroc.push_back(r.auroc);
    aupr.push_back(r.aupr);
    prec.push_back(r.prec_at_90);
  }
  if (acc.size() == reports.size()) out.acc = Summarize(acc);
  out.auroc = Summarize(auroc);
  out.aupr = Summarize(aupr);
  out.prec_at_90 = Summarize(prec);
  return out;
}

}  // namespace fsosr
