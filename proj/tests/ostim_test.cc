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

#include "fsosr/ostim.h"

#include <cmath>
#include <numeric>
#include <random>

#include "fsosr/synthgen.h"
#include "gradient_check.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fsosr {
namespace {

using oracle::OutlierColumn;

OutlierColumn ColumnOf(Variant v) {
  switch (v) {
    case Variant::kOstimImplicit:
      return OutlierColumn::kImplicit;
    case Variant::kExplicitDummy:
      return OutlierColumn::kDummy;
    case Variant::kTimClosed:
      break;
  }
  return OutlierColumn::kNone;
}

PrototypeSet RandomState(std::mt19937_64& rng, const Episode& ep,
                         Variant variant) {
  std::normal_distribution<double> n01(0.0, 1.0);
  PrototypeSet ps;
  ps.variant = variant;
  ps.mu = Vector::Zero(ep.dim());
  for (Eigen::Index d = 0; d < ps.mu.size(); ++d) ps.mu[d] = 0.3 * n01(rng);
  ps.w = Matrix(ep.n_way, ep.dim());
  for (Eigen::Index i = 0; i < ps.w.size(); ++i) ps.w.data()[i] = n01(rng);
  if (variant == Variant::kExplicitDummy) {
    ps.dummy = Vector(ep.dim());
    for (Eigen::Index d = 0; d < ep.dim(); ++d) (*ps.dummy)[d] = n01(rng);
  }
  return ps;
}

FeatureSet SeparableStore(uint64_t seed) {
  SynthSpec spec;
  spec.dim = 16;
  spec.n_classes = 20;
  spec.points_per_class = 40;
  spec.centroid_radius = 0.2;
  spec.within_std = 0.06;
  spec.seed = seed;
  spec.base_fraction = 0.5;
  spec.val_fraction = 0.0;
  spec.test_fraction = 0.5;
  return Generate(spec);
}

TEST(InitPrototypes, OneShotCopiesSupport) {
  std::mt19937_64 rng(1);
  const Episode ep = testing::RandomEpisode(rng, 4, 1, 6, 4, 4);
  const PrototypeSet ps =
      InitPrototypes(ep, CenteringPolicy::Task(), Variant::kOstimImplicit);
  EXPECT_EQ(ps.w, ep.support);
  EXPECT_FALSE(ps.dummy.has_value());
  EXPECT_EQ(ps.n_outcomes(), 5);
}

TEST(InitPrototypes, FiveShotMatchesClassMeans) {
  std::mt19937_64 rng(2);
  const Episode ep = testing::RandomEpisode(rng, 3, 5, 7, 6, 6);
  const PrototypeSet ps =
      InitPrototypes(ep, CenteringPolicy::None(), Variant::kTimClosed);
  const oracle::Rows support = testing::ToRows(ep.support);
  for (int c = 0; c < 3; ++c) {
    oracle::Rows members;
    for (size_t i = 0; i < support.size(); ++i) {
      if (ep.support_labels[i] == c) members.push_back(support[i]);
    }
    const auto mean = oracle::Mean(members);
    for (int d = 0; d < 7; ++d) EXPECT_NEAR(ps.w(c, d), mean[d], 1e-6);
  }
  EXPECT_EQ(ps.n_outcomes(), 3);
}

TEST(InitPrototypes, DummyStartsAlongImplicitPrototype) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Episode ep = testing::RandomEpisode(rng, 3, 1, 5, 5, 5);
    const CenteringPolicy task = CenteringPolicy::Task();
    const PrototypeSet dummy =
        InitPrototypes(ep, task, Variant::kExplicitDummy);
    const PrototypeSet implicit =
        InitPrototypes(ep, task, Variant::kOstimImplicit);
    ASSERT_TRUE(dummy.dummy.has_value());
    // |v| of the implicit prototype v = -(1/K) sum psi(w_k).
    const auto mu = testing::ToStd(implicit.mu);
    std::vector<double> v(5, 0.0);
    for (const auto& w : testing::ToRows(implicit.w)) {
      const auto u = oracle::CenterNormalize(w, mu);
      for (int d = 0; d < 5; ++d) v[d] -= u[d] / 3.0;
    }
    const double v_norm = std::sqrt(oracle::Dot(v, v));
    for (int i = 0; i < ep.n_query(); ++i) {
      const Vector z = ep.query.row(i).transpose();
      const Vector ld = Logits(dummy, z, 10.0);
      const Vector li = Logits(implicit, z, 10.0);
      EXPECT_NEAR(ld[3] * v_norm, li[3], 1e-6);
      EXPECT_NEAR((ld.head(3) - li.head(3)).cwiseAbs().maxCoeff(), 0.0, 1e-12);
    }
  }
}

TEST(Logits, TwoClassSymmetricExample) {
  PrototypeSet ps;
  ps.mu = Vector::Zero(2);
  // Prototypes at 60 and 120 degrees from the query direction.
  ps.w = testing::ToMatrix({{0.5, std::sqrt(3.0) / 2}, {-0.5, std::sqrt(3.0) / 2}});
  const Vector l = Logits(ps, Eigen::Vector2d(2, 0), 4.0);
  EXPECT_NEAR(l[0], 4.0 * 0.5, 1e-12);
  EXPECT_NEAR(l[1], -4.0 * 0.5, 1e-12);
  EXPECT_NEAR(l[2], 0.0, 1e-12);
}

TEST(Logits, EqualInlierLogitsGiveNegatedOutlierLogit) {
  PrototypeSet ps;
  ps.mu = Vector::Zero(3);
  ps.w = testing::ToMatrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const Vector l = Logits(ps, Eigen::Vector3d(2, 2, 2), 10.0);
  const double c = 10.0 / std::sqrt(3.0);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(l[k], c, 1e-12);
  EXPECT_NEAR(l[3], -c, 1e-12);
}

TEST(Logits, ImplicitPrototypeReadingAndOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + trial % 4;
    const int dim = 3 + trial % 6;
    const Episode ep = testing::RandomEpisode(rng, k, 1, dim, 2, 2);
    for (const Variant v : {Variant::kOstimImplicit, Variant::kTimClosed,
                            Variant::kExplicitDummy}) {
      const PrototypeSet ps = RandomState(rng, ep, v);
      const auto mu = testing::ToStd(ps.mu);
      const auto w = testing::ToRows(ps.w);
      const auto z = testing::ToStd(ep.query.row(0).transpose());
      const Vector got = Logits(ps, ep.query.row(0).transpose(), 10.0);
      const auto want = oracle::Logits(
          z, w, mu, 10.0, ColumnOf(v),
          ps.dummy ? testing::ToStd(*ps.dummy) : std::vector<double>{});
      ASSERT_EQ(got.size(), static_cast<Eigen::Index>(want.size()));
      for (size_t j = 0; j < want.size(); ++j) EXPECT_NEAR(got[j], want[j], 1e-9);
      if (v == Variant::kOstimImplicit) {
        // <psi(z), -(1/K) sum psi(w_k)> * tau, computed independently.
        const auto q = oracle::CenterNormalize(z, mu);
        double dot = 0.0;
        for (const auto& wk : w) {
          dot -= oracle::Dot(q, oracle::CenterNormalize(wk, mu)) / k;
        }
        EXPECT_NEAR(got[k], 10.0 * dot, 1e-6);
      }
    }
  }
}

TEST(Logits, DegenerateQueryThrows) {
  PrototypeSet ps;
  ps.mu = Eigen::Vector2d(1, 1);
  ps.w = testing::ToMatrix({{1, 0}, {0, 1}});
  EXPECT_THROW(Logits(ps, Eigen::Vector2d(1, 1), 10.0), DataError);
}

TEST(ComputeLoss, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2 + trial % 3;
    const Episode ep = testing::RandomEpisode(rng, k, 2, 4, 3, 3);
    for (const Variant v : {Variant::kOstimImplicit, Variant::kTimClosed,
                            Variant::kExplicitDummy}) {
      const PrototypeSet ps = RandomState(rng, ep, v);
      OstimConfig cfg;
      cfg.alpha = 0.7;
      cfg.temperature = 3.0;
      const LossBreakdown got = ComputeLoss(ps, ep, cfg);
      const oracle::Loss want = oracle::TransductiveLoss(
          testing::ToRows(ep.support), ep.support_labels,
          testing::ToRows(ep.query), testing::ToRows(ps.w),
          testing::ToStd(ps.mu), 3.0, 0.7, ColumnOf(v),
          ps.dummy ? testing::ToStd(*ps.dummy) : std::vector<double>{});
      EXPECT_NEAR(got.ce, want.ce, 1e-8);
      EXPECT_NEAR(got.marginal_entropy, want.marginal, 1e-8);
      EXPECT_NEAR(got.conditional_entropy, want.conditional, 1e-8);
      EXPECT_NEAR(got.total, want.total, 1e-8);
      const double log_outcomes = std::log(ps.n_outcomes());
      EXPECT_GE(got.ce, 0.0);
      EXPECT_GE(got.conditional_entropy, 0.0);
      EXPECT_GE(got.marginal_entropy, 0.0);
      EXPECT_LE(got.marginal_entropy, log_outcomes + 1e-12);
    }
  }
}

TEST(ComputeLoss, UniformPredictions) {
  // Queries orthogonal to every prototype: all logits zero.
  const Episode ep = testing::MakeEpisode(
      2, {{1, 0, 0}, {0, 1, 0}}, {0, 1}, {{0, 0, 1}, {0, 0, -2}},
      {kOutlier, kOutlier});
  PrototypeSet ps;
  ps.mu = Vector::Zero(3);
  ps.w = ep.support;
  const LossBreakdown loss = ComputeLoss(ps, ep, OstimConfig{});
  EXPECT_NEAR(loss.marginal_entropy, std::log(3.0), 1e-12);
  EXPECT_NEAR(loss.conditional_entropy, std::log(3.0), 1e-12);
}

TEST(ComputeLoss, OneHotPredictionsSpreadUniformly) {
  // Huge temperature makes each query one-hot; the three queries land on
  // class 0, class 1 and the outlier column respectively.
  const Episode ep = testing::MakeEpisode(
      2, {{1, 0}, {0, 1}}, {0, 1}, {{1, 0}, {0, 1}, {-1, -1}},
      {0, 1, kOutlier});
  PrototypeSet ps;
  ps.mu = Vector::Zero(2);
  ps.w = ep.support;
  OstimConfig cfg;
  cfg.temperature = 1e4;
  const LossBreakdown loss = ComputeLoss(ps, ep, cfg);
  EXPECT_NEAR(loss.conditional_entropy, 0.0, 1e-12);
  EXPECT_NEAR(loss.marginal_entropy, std::log(3.0), 1e-12);
  EXPECT_TRUE(std::isfinite(loss.total));
}

TEST(Gradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const int k = 2 + trial % 2;
    const int dim = 2 + trial % 7;
    const Episode ep = testing::RandomEpisode(rng, k, 2, dim, 4, 3);
    for (const Variant v : {Variant::kOstimImplicit, Variant::kTimClosed,
                            Variant::kExplicitDummy}) {
      OstimConfig cfg;
      cfg.alpha = 0.5 + 0.25 * (trial % 3);
      cfg.temperature = 2.0 + trial % 5;
      EXPECT_LE(testing::GradientRelError(RandomState(rng, ep, v), ep, cfg),
                1e-4);
    }
  }
}

TEST(Refine, ZeroStepsIsIdentity) {
  std::mt19937_64 rng(7);
  const Episode ep = testing::RandomEpisode(rng, 3, 2, 5, 6, 6);
  for (const Variant v : {Variant::kOstimImplicit, Variant::kExplicitDummy}) {
    const PrototypeSet init = InitPrototypes(ep, CenteringPolicy::Task(), v);
    OstimConfig cfg;
    cfg.n_steps = 0;
    const RefineResult r = Refine(init, ep, cfg);
    EXPECT_EQ(r.prototypes.w, init.w);
    EXPECT_EQ(r.prototypes.mu, init.mu);
    EXPECT_EQ(r.prototypes.dummy, init.dummy);
    ASSERT_EQ(r.trace.size(), 1u);
    EXPECT_EQ(r.trace[0].total, ComputeLoss(init, ep, cfg).total);
  }
}

TEST(Refine, TraceAndObserver) {
  std::mt19937_64 rng(8);
  const Episode ep = testing::RandomEpisode(rng, 3, 1, 5, 6, 6);
  OstimConfig cfg;
  cfg.n_steps = 7;
  std::vector<int> steps;
  const PrototypeSet init =
      InitPrototypes(ep, CenteringPolicy::Task(), Variant::kOstimImplicit);
  const RefineResult r = Refine(init, ep, cfg, [&](int s, const PrototypeSet& ps) {
    steps.push_back(s);
    EXPECT_EQ(ps.mu, init.mu);
  });
  std::vector<int> expected(8);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(steps, expected);
  EXPECT_EQ(r.trace.size(), 8u);
  EXPECT_NE(r.prototypes.w, init.w);
}

TEST(Refine, ConfigValidation) {
  OstimConfig cfg;
  cfg.alpha = -1.0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = OstimConfig{};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = OstimConfig{};
  cfg.n_steps = -1;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg = OstimConfig{};
  cfg.temperature = 0.0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  EXPECT_EQ(ParseVariant("implicit"), Variant::kOstimImplicit);
  EXPECT_EQ(ParseVariant("tim_closed"), Variant::kTimClosed);
  EXPECT_EQ(ParseVariant("explicit_dummy"), Variant::kExplicitDummy);
  EXPECT_THROW(ParseVariant("dummy"), ConfigError);
}

TEST(Refine, DivergenceNamesStep) {
  std::mt19937_64 rng(9);
  const Episode ep = testing::RandomEpisode(rng, 2, 1, 3, 2, 2);
  PrototypeSet ps =
      InitPrototypes(ep, CenteringPolicy::Task(), Variant::kOstimImplicit);
  ps.w(1, 2) = std::nan("");
  try {
    Refine(ps, ep, OstimConfig{});
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 0);
    EXPECT_EQ(ExitCodeFor(e.kind()), 4);
  }
}

TEST(Refine, ImplicitIdentityAtEveryStep) {
  const FeatureSet fs = SeparableStore(11);
  const EpisodeSpec spec;
  OstimConfig cfg;
  cfg.n_steps = 50;
  for (int e = 0; e < 3; ++e) {
    const Episode ep = SampleEpisode(fs, spec, e);
    const PrototypeSet init =
        InitPrototypes(ep, CenteringPolicy::Task(), Variant::kOstimImplicit);
    double worst = 0.0;
    Refine(init, ep, cfg, [&](int, const PrototypeSet& ps) {
      for (int i = 0; i < ep.n_query(); ++i) {
        const Vector l = Logits(ps, ep.query.row(i).transpose(), 10.0);
        worst = std::max(worst, std::abs(l[5] + l.head(5).mean()));
      }
    });
    EXPECT_LE(worst, 1e-9);
  }
}

TEST(Refine, MonotoneWithoutConditionalEntropy) {
  const EpisodeSpec spec;
  OstimConfig cfg;
  cfg.alpha = 0.0;
  cfg.n_steps = 200;
  int checked = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const FeatureSet fs = SeparableStore(seed);
    for (int e = 0; e < 20; ++e) {
      const Episode ep = SampleEpisode(fs, spec, e);
      const RefineResult r = Refine(
          InitPrototypes(ep, CenteringPolicy::Task(), Variant::kOstimImplicit),
          ep, cfg);
      for (size_t s = 1; s < r.trace.size(); ++s) {
        ASSERT_LE(r.trace[s].total, r.trace[s - 1].total + 1e-12)
            << "seed " << seed << " episode " << e << " step " << s;
      }
      ++checked;
    }
  }
  EXPECT_EQ(checked, 100);
}

TEST(Predict, GeometryExamples) {
  const Episode ep = testing::MakeEpisode(
      2, {{1, 0}, {-1, 0}}, {0, 1}, {{1, 0}, {0, 1}}, {0, kOutlier});
  PrototypeSet ps;
  ps.mu = Vector::Zero(2);
  ps.w = testing::ToMatrix({{1, 0.2}, {-1, 0.2}});
  const PredictionSheet s = Predict(ps, ep, OstimConfig{});
  EXPECT_EQ(s.closed_pred[0], 0);
  EXPECT_LT(s.probs(0, 2), s.probs(0, 0));
  // (0,-1) is the implicit prototype direction.
  Episode on_implicit = ep;
  on_implicit.query.row(1) << 0, -1;
  const PredictionSheet t = Predict(ps, on_implicit, OstimConfig{});
  Eigen::Index arg = 0;
  t.probs.row(1).maxCoeff(&arg);
  EXPECT_EQ(arg, 2);
  EXPECT_DOUBLE_EQ(t.outlier_score[1], t.probs(1, 2));
}

TEST(Predict, RowsMatchOracleSoftmax) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const Episode ep = testing::RandomEpisode(rng, 3, 1, 6, 5, 5);
    for (const Variant v : {Variant::kOstimImplicit, Variant::kTimClosed,
                            Variant::kExplicitDummy}) {
      const PrototypeSet ps = RandomState(rng, ep, v);
      const PredictionSheet s = Predict(ps, ep, OstimConfig{});
      for (int i = 0; i < ep.n_query(); ++i) {
        EXPECT_NEAR(s.probs.row(i).sum(), 1.0, 1e-9);
        const auto p = oracle::Softmax(oracle::Logits(
            testing::ToStd(ep.query.row(i).transpose()), testing::ToRows(ps.w),
            testing::ToStd(ps.mu), 10.0, ColumnOf(v),
            ps.dummy ? testing::ToStd(*ps.dummy) : std::vector<double>{}));
        for (size_t j = 0; j < p.size(); ++j) EXPECT_NEAR(s.probs(i, j), p[j], 1e-12);
        if (v == Variant::kTimClosed) {
          EXPECT_DOUBLE_EQ(s.outlier_score[i], -s.probs.row(i).maxCoeff());
        } else {
          EXPECT_DOUBLE_EQ(s.outlier_score[i], s.probs(i, 3));
        }
      }
    }
  }
}

TEST(Predict, ClosedPredictionInvariantToTemperature) {
  std::mt19937_64 rng(12);
  const Episode ep = testing::RandomEpisode(rng, 4, 1, 6, 20, 20);
  const PrototypeSet ps = RandomState(rng, ep, Variant::kOstimImplicit);
  OstimConfig cfg;
  cfg.temperature = 1.0;
  const auto ref = Predict(ps, ep, cfg).closed_pred;
  for (const double tau : {0.2, 5.0, 40.0}) {
    cfg.temperature = tau;
    EXPECT_EQ(Predict(ps, ep, cfg).closed_pred, ref);
  }
}

TEST(Predict, LabelPermutationEquivariance) {
  const FeatureSet fs = SeparableStore(13);
  const Episode ep = SampleEpisode(fs, EpisodeSpec{}, 0);
  const std::vector<int> perm = {3, 0, 4, 1, 2};  // old label -> new label
  Episode permuted = ep;
  for (int& l : permuted.support_labels) l = perm[l];
  for (int& t : permuted.query_truth) {
    if (t != kOutlier) t = perm[t];
  }
  OstimConfig cfg;
  cfg.n_steps = 30;
  for (const Variant v : {Variant::kOstimImplicit, Variant::kExplicitDummy}) {
    const RefineResult a =
        Refine(InitPrototypes(ep, CenteringPolicy::Task(), v), ep, cfg);
    const RefineResult b = Refine(
        InitPrototypes(permuted, CenteringPolicy::Task(), v), permuted, cfg);
    for (int k = 0; k < 5; ++k) {
      EXPECT_LT((a.prototypes.w.row(k) - b.prototypes.w.row(perm[k]))
                    .cwiseAbs()
                    .maxCoeff(),
                1e-9);
    }
    const PredictionSheet pa = Predict(a.prototypes, ep, cfg);
    const PredictionSheet pb = Predict(b.prototypes, permuted, cfg);
    for (int i = 0; i < ep.n_query(); ++i) {
      EXPECT_EQ(perm[pa.closed_pred[i]], pb.closed_pred[i]);
      EXPECT_NEAR(pa.outlier_score[i], pb.outlier_score[i], 1e-9);
      for (int k = 0; k < 5; ++k) {
        EXPECT_NEAR(pa.probs(i, k), pb.probs(i, perm[k]), 1e-9);
      }
    }
  }
}

TEST(Refine, MarginalEntropyDoesNotCollapse) {
  const FeatureSet fs = SeparableStore(14);
  for (int e = 0; e < 10; ++e) {
    const Episode ep = SampleEpisode(fs, EpisodeSpec{}, e);
    const RefineResult r = Refine(
        InitPrototypes(ep, CenteringPolicy::Task(), Variant::kOstimImplicit),
        ep, OstimConfig{});
    EXPECT_GT(r.trace.back().marginal_entropy, 0.5 * std::log(6.0));
  }
}

TEST(ClosedSetEntropy, Examples) {
  PredictionSheet sheet;
  sheet.n_way = 3;
  sheet.probs = testing::ToMatrix(
      {{0.2, 0.2, 0.2, 0.4}, {0.0, 0.5, 0.0, 0.5}, {0.1, 0.3, 0.2, 0.4}});
  const auto h = ClosedSetEntropy(sheet);
  EXPECT_NEAR(h[0], std::log(3.0), 1e-12);
  EXPECT_NEAR(h[1], 0.0, 1e-12);
  double want = 0.0;
  for (const double p : {1.0 / 6, 3.0 / 6, 2.0 / 6}) want -= p * std::log(p);
  EXPECT_NEAR(h[2], want, 1e-10);
}

TEST(ClosedSetEntropy, OutliersGainEntropyInliersLoseIt) {
  const FeatureSet fs = SeparableStore(15);
  double in_init = 0, in_ref = 0, out_init = 0, out_ref = 0;
  const OstimConfig cfg;
  for (int e = 0; e < 40; ++e) {
    const Episode ep = SampleEpisode(fs, EpisodeSpec{}, e);
    const PrototypeSet init =
        InitPrototypes(ep, CenteringPolicy::Task(), Variant::kOstimImplicit);
    const auto h0 = ClosedSetEntropy(Predict(init, ep, cfg));
    const auto h1 =
        ClosedSetEntropy(Predict(Refine(init, ep, cfg).prototypes, ep, cfg));
    for (int i = 0; i < ep.n_query(); ++i) {
      if (ep.query_truth[i] == kOutlier) {
        out_init += h0[i];
        out_ref += h1[i];
      } else {
        in_init += h0[i];
        in_ref += h1[i];
      }
    }
  }
  EXPECT_GE(out_ref, out_init);
  EXPECT_LT(in_ref, in_init);
}

}  // namespace
}  // namespace fsosr
