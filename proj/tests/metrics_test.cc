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

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "test_util.h"

namespace fsosr {
namespace {

TEST(Accuracy, Examples) {
  const std::vector<int> truth = {0, 1, kOutlier, 2, kOutlier};
  EXPECT_DOUBLE_EQ(Accuracy(std::vector<int>{0, 1, 0, 2, 1}, truth), 1.0);
  const std::vector<int> four = {0, 1, 2, 0};
  EXPECT_DOUBLE_EQ(Accuracy(std::vector<int>{0, 1, 2, 1}, four), 0.75);
  EXPECT_THROW(Accuracy(std::vector<int>{0}, std::vector<int>{kOutlier}),
               DataError);
}

TEST(Accuracy, ChanceLevel) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> cls(0, 4);
  std::vector<int> pred(20000), truth(20000);
  for (size_t i = 0; i < pred.size(); ++i) {
    pred[i] = cls(rng);
    truth[i] = cls(rng);
  }
  EXPECT_NEAR(Accuracy(pred, truth), 0.2, 0.01);
}

TEST(Auroc, PerfectAndConstant) {
  const std::vector<bool> y = {true, false, true, false};
  EXPECT_DOUBLE_EQ(Auroc(std::vector<double>{3, 1, 4, 2}, y), 1.0);
  EXPECT_DOUBLE_EQ(Auroc(std::vector<double>{1, 3, 2, 4}, y), 0.0);
  EXPECT_DOUBLE_EQ(Auroc(std::vector<double>{7, 7, 7, 7}, y), 0.5);
  EXPECT_THROW(Auroc(std::vector<double>{1, 2}, {true, true}), DataError);
}

TEST(Auroc, SixPointCase) {
  const std::vector<double> s = {0.9, 0.4, 0.4, 0.7, 0.1, 0.4};
  const std::vector<bool> y = {true, false, true, false, false, true};
  // Pairs: 0.9 beats all 3; each 0.4 outlier beats 0.1, ties 0.4, loses 0.7.
  EXPECT_DOUBLE_EQ(Auroc(s, y), (3.0 + 2 * 1.5) / 9.0);
  EXPECT_DOUBLE_EQ(Auroc(s, y), oracle::PairCountAuroc(s, y));
}

TEST(Aupr, PerfectAndFiveOrTenPointCases) {
  EXPECT_DOUBLE_EQ(
      Aupr(std::vector<double>{5, 1, 4, 2}, {true, false, true, false}), 1.0);
  const std::vector<double> s5 = {0.8, 0.8, 0.5, 0.3, 0.1};
  const std::vector<bool> y5 = {true, false, true, false, true};
  // Block {0.8}: tp 1 fp 1; 0.5: tp 2 fp 1; 0.1: tp 3 fp 2.
  EXPECT_DOUBLE_EQ(Aupr(s5, y5), (1.0 / 3) * 0.5 + (1.0 / 3) * (2.0 / 3) +
                                     (1.0 / 3) * (3.0 / 5));
  EXPECT_EQ(Aupr(s5, y5), oracle::SweepAupr(s5, y5));

  const std::vector<double> s10 = {10, 9, 9, 8, 7, 6, 6, 5, 3, 1};
  const std::vector<bool> y10 = {true,  true,  false, false, true,
                                 false, true,  true,  false, true};
  EXPECT_EQ(Aupr(s10, y10), oracle::SweepAupr(s10, y10));
  // Recall 0.9 needs all 6 outliers, first reached at threshold 1.
  EXPECT_DOUBLE_EQ(PrecisionAtRecall(s10, y10, 0.9), 0.6);
  // Recall 0.8 needs 5: thresholds 5 (tp 5, fp 3) and 3 (tp 5, fp 4).
  EXPECT_DOUBLE_EQ(PrecisionAtRecall(s10, y10, 0.8), 5.0 / 8.0);
  EXPECT_EQ(PrecisionAtRecall(s10, y10, 0.9),
            oracle::SweepPrecisionAtRecall(s10, y10, 0.9));
  EXPECT_DOUBLE_EQ(
      PrecisionAtRecall(std::vector<double>{5, 1, 4, 2},
                        {true, false, true, false}),
      1.0);
}

TEST(Metrics, RandomizedOraclesWithTies) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + trial % 30;
    std::uniform_int_distribution<int> level(0, 1 + trial % 7);
    std::vector<double> s(n);
    std::vector<bool> y(n);
    for (int i = 0; i < n; ++i) {
      s[i] = 0.25 * level(rng);
      y[i] = rng() & 1;
    }
    y[0] = true;
    y[1] = false;
    EXPECT_EQ(Auroc(s, y), oracle::PairCountAuroc(s, y));
    EXPECT_EQ(Aupr(s, y), oracle::SweepAupr(s, y));
    EXPECT_EQ(PrecisionAtRecall(s, y, 0.9),
              oracle::SweepPrecisionAtRecall(s, y, 0.9));
  }
}

TEST(Auroc, FlipIdentityAndMonotoneInvariance) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(40), neg(40), squashed(40);
    std::vector<bool> y(40), flipped(40);
    for (int i = 0; i < 40; ++i) {
      s[i] = std::round(4 * n01(rng)) / 4;
      y[i] = i % 3 == 0;
      flipped[i] = !y[i];
      neg[i] = -s[i];
      squashed[i] = std::tanh(s[i]) * 3 + 1;
    }
    EXPECT_NEAR(Auroc(s, y) + Auroc(neg, y), 1.0, 1e-12);
    EXPECT_NEAR(Auroc(s, flipped), Auroc(neg, y), 1e-12);
    EXPECT_EQ(Auroc(squashed, y), Auroc(s, y));
    EXPECT_EQ(Aupr(squashed, y), Aupr(s, y));
  }
}

TEST(Metrics, ConstantScoresGivePrevalence) {
  std::vector<double> s(10, 1.0);
  std::vector<bool> y(10, false);
  for (int i = 0; i < 3; ++i) y[i] = true;
  EXPECT_DOUBLE_EQ(Auroc(s, y), 0.5);
  EXPECT_DOUBLE_EQ(Aupr(s, y), 0.3);
  EXPECT_DOUBLE_EQ(PrecisionAtRecall(s, y, 0.9), 0.3);
}

TEST(Metrics, RandomScoresNearHalf) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(10000);
  std::vector<bool> y(10000);
  for (int i = 0; i < 10000; ++i) {
    s[i] = u(rng);
    y[i] = i % 2 == 0;
  }
  EXPECT_NEAR(Auroc(s, y), 0.5, 0.02);
  EXPECT_NEAR(Aupr(s, y), 0.5, 0.02);
  EXPECT_NEAR(PrecisionAtRecall(s, y, 0.9), 0.5, 0.02);
}

TEST(ScoreEpisode, UsesTruthAndSheet) {
  PredictionSheet sheet;
  sheet.n_way = 2;
  sheet.outlier_score = {0.1, 0.9, 0.2, 0.8};
  sheet.closed_pred = {0, 0, 0, 1};
  const std::vector<int> truth = {0, kOutlier, 1, kOutlier};
  const EpisodeReport r = ScoreEpisode(sheet, truth);
  EXPECT_DOUBLE_EQ(*r.acc, 0.5);
  EXPECT_DOUBLE_EQ(r.auroc, 1.0);
  EXPECT_DOUBLE_EQ(r.aupr, 1.0);
  EXPECT_DOUBLE_EQ(r.prec_at_90, 1.0);
  EXPECT_FALSE(ScoreEpisode(sheet, truth, false).acc.has_value());
}

TEST(Aggregate, SingleAndIdenticalReports) {
  EpisodeReport r{0.6, 0.7, 0.8, 0.5};
  std::vector<EpisodeReport> one = {r};
  RunReport a = Aggregate(one);
  EXPECT_EQ(a.n_episodes, 1);
  EXPECT_DOUBLE_EQ(a.acc->mean, 0.6);
  EXPECT_DOUBLE_EQ(a.auroc.ci95, 0.0);
  std::vector<EpisodeReport> two = {r, r};
  a = Aggregate(two);
  EXPECT_DOUBLE_EQ(a.aupr.mean, 0.8);
  EXPECT_DOUBLE_EQ(a.aupr.ci95, 0.0);
  EXPECT_THROW(Aggregate(std::vector<EpisodeReport>{}), DataError);
  r.acc.reset();
  EXPECT_FALSE(Aggregate(std::vector<EpisodeReport>{r}).acc.has_value());
}

TEST(Aggregate, MatchesScalarOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<EpisodeReport> reports(100);
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) {
    v[i] = u(rng);
    reports[i] = {u(rng), v[i], u(rng), u(rng)};
  }
  double mean = 0.0;
  for (const double x : v) mean += x / 100.0;
  double ss = 0.0;
  for (const double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / 99.0);
  const RunReport a = Aggregate(reports);
  EXPECT_NEAR(a.auroc.mean, mean, 1e-12);
  EXPECT_NEAR(a.auroc.std, sd, 1e-12);
  EXPECT_NEAR(a.auroc.ci95, 1.96 * sd / 10.0, 1e-12);
}

}  // namespace
}  // namespace fsosr
