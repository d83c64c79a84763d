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
#include <string>

namespace fsosr {
namespace {

constexpr double kEntropyFloor = 1e-30;

// p log p with the convention 0 log 0 = 0.
double XLogX(double p) { return p < kEntropyFloor ? 0.0 : p * std::log(p); }

struct NormalizedPrototypes {
  Matrix u;      // K x D, unit rows
  Vector norms;  // ||w_k - mu||
};

NormalizedPrototypes NormalizePrototypes(const PrototypeSet& ps) {
  NormalizedPrototypes out{Matrix(ps.w.rows(), ps.w.cols()),
                           Vector(ps.w.rows())};
  for (Eigen::Index k = 0; k < ps.w.rows(); ++k) {
    const Vector centered = ps.w.row(k).transpose() - ps.mu;
    out.norms[k] = centered.norm();
    out.u.row(k) = CenterNormalize(ps.w.row(k).transpose(), ps.mu).transpose();
  }
  return out;
}

// Logits of already-normalized features (rows of x).
Matrix LogitsOfNormalized(const PrototypeSet& ps, const Matrix& u,
                          const Matrix& x, double temperature) {
  const int k = ps.n_way();
  Matrix logits(x.rows(), ps.n_outcomes());
  logits.leftCols(k) = temperature * x * u.transpose();
  switch (ps.variant) {
    case Variant::kOstimImplicit:
      logits.col(k) = -logits.leftCols(k).rowwise().sum() / k;
      break;
    case Variant::kExplicitDummy:
      logits.col(k) =
          temperature * x * CenterNormalize(*ps.dummy, ps.mu);
      break;
    case Variant::kTimClosed:
      break;
  }
  return logits;
}

// Per-episode constant inputs of the objective.
struct Problem {
  Matrix support;  // normalized
  Matrix query;    // normalized
  std::vector<int> labels;
};

Problem MakeProblem(const PrototypeSet& ps, const Episode& episode) {
  return {CenterNormalizeRows(episode.support, ps.mu),
          CenterNormalizeRows(episode.query, ps.mu), episode.support_labels};
}

LossGradient Evaluate(const PrototypeSet& ps, const Problem& problem,
                      const OstimConfig& cfg, bool want_gradient) {
  const int k = ps.n_way();
  const int c = ps.n_outcomes();
  const double tau = cfg.temperature;
  const NormalizedPrototypes protos = NormalizePrototypes(ps);

  const Matrix support_logits =
      LogitsOfNormalized(ps, protos.u, problem.support, tau);
  const Matrix query_logits =
      LogitsOfNormalized(ps, protos.u, problem.query, tau);
  const Matrix ps_support = SoftmaxRows(support_logits);
  const Matrix ps_query = SoftmaxRows(query_logits);
  const Eigen::Index n_s = problem.support.rows();
  const Eigen::Index n_q = problem.query.rows();

  LossGradient out;
  LossBreakdown& loss = out.loss;
  // Cross-entropy through log-softmax for stability.
  for (Eigen::Index i = 0; i < n_s; ++i) {
    const double max = support_logits.row(i).maxCoeff();
    const double lse =
        max + std::log((support_logits.row(i).array() - max).exp().sum());
    loss.ce -= support_logits(i, problem.labels[i]) - lse;
  }
  loss.ce /= static_cast<double>(n_s);

  const Vector marginal = ps_query.colwise().mean().transpose();
  for (int j = 0; j < c; ++j) loss.marginal_entropy -= XLogX(marginal[j]);
  for (Eigen::Index i = 0; i < n_q; ++i) {
    for (int j = 0; j < c; ++j) {
      loss.conditional_entropy -= XLogX(ps_query(i, j));
    }
  }
  loss.conditional_entropy /= static_cast<double>(n_q);
  loss.total = loss.ce - (loss.marginal_entropy -
                          cfg.alpha * loss.conditional_entropy);
  if (!want_gradient) return out;

  // dL/dlogits for support rows: (p - y) / |S|.
  Matrix g_support = ps_support;
  for (Eigen::Index i = 0; i < n_s; ++i) g_support(i, problem.labels[i]) -= 1.0;
  g_support /= static_cast<double>(n_s);

  // dL/dp_ij for query rows is (log pbar_j - alpha log p_ij) / |Q| up to a
  // per-row constant that the softmax Jacobian annihilates.
  Matrix g_query(n_q, c);
  for (Eigen::Index i = 0; i < n_q; ++i) {
    double dot = 0.0;
    for (int j = 0; j < c; ++j) {
      const double p = ps_query(i, j);
      const double dp =
          (std::log(std::max(marginal[j], kEntropyFloor)) -
           cfg.alpha * std::log(std::max(p, kEntropyFloor))) /
          static_cast<double>(n_q);
      g_query(i, j) = dp;
      dot += p * dp;
    }
    for (int j = 0; j < c; ++j) {
      g_query(i, j) = ps_query(i, j) * (g_query(i, j) - dot);
    }
  }

  // Fold the implicit outlier column back onto the inlier logits.
  Matrix g_in_support = g_support.leftCols(k);
  Matrix g_in_query = g_query.leftCols(k);
  if (ps.variant == Variant::kOstimImplicit) {
    g_in_support.colwise() -= g_support.col(k) / k;
    g_in_query.colwise() -= g_query.col(k) / k;
  }

  // dL/du_k, then through u_k = (w_k - mu) / ||w_k - mu||.
  const Matrix g_u = tau * (g_in_support.transpose() * problem.support +
                            g_in_query.transpose() * problem.query);
  out.w.resize(k, ps.w.cols());
  for (int j = 0; j < k; ++j) {
    const auto u = protos.u.row(j);
    const auto g = g_u.row(j);
    out.w.row(j) = (g - u * u.dot(g)) / protos.norms[j];
  }
  if (ps.variant == Variant::kExplicitDummy) {
    const Vector g = tau * (problem.support.transpose() * g_support.col(k) +
                            problem.query.transpose() * g_query.col(k));
    const Vector centered = *ps.dummy - ps.mu;
    const double norm = centered.norm();
    const Vector u = centered / norm;
    out.dummy = (g - u * u.dot(g)) / norm;
  }
  return out;
}

bool AllFinite(const LossGradient& lg) {
  return std::isfinite(lg.loss.total) && lg.w.allFinite() &&
         (!lg.dummy.has_value() || lg.dummy->allFinite());
}

}  // namespace

const char* VariantName(Variant variant) {
  switch (variant) {
    case Variant::kOstimImplicit:
      return "implicit";
    case Variant::kTimClosed:
      return "tim_closed";
    case Variant::kExplicitDummy:
      return "explicit_dummy";
  }
  return "?";
}

Variant ParseVariant(const std::string& name) {
  if (name == "implicit" || name == "ostim") return Variant::kOstimImplicit;
  if (name == "tim_closed") return Variant::kTimClosed;
  if (name == "explicit_dummy") return Variant::kExplicitDummy;
  throw ConfigError("unknown ostim variant '" + name + "'");
}

void OstimConfig::Validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw ConfigError("ostim.alpha must be a finite value >= 0");
  }
  if (n_steps < 0) throw ConfigError("ostim.n_steps must be >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("ostim.lr must be positive");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("ostim.temperature must be positive");
  }
}

PrototypeSet InitPrototypes(const Episode& episode,
                            const CenteringPolicy& policy, Variant variant) {
  PrototypeSet ps;
  ps.variant = variant;
  ps.mu = policy.Resolve(episode);
  const int k = episode.n_way;
  ps.w = Matrix::Zero(k, episode.dim());
  std::vector<int> counts(k, 0);
  for (int i = 0; i < episode.n_support(); ++i) {
    ps.w.row(episode.support_labels[i]) += episode.support.row(i);
    ++counts[episode.support_labels[i]];
  }
  for (int j = 0; j < k; ++j) ps.w.row(j) /= counts[j];
  if (variant == Variant::kExplicitDummy) {
    const NormalizedPrototypes protos = NormalizePrototypes(ps);
    const Vector implicit = -protos.u.colwise().mean().transpose();
    if (implicit.norm() < kDegenerateNorm) {
      throw DataError("prototypes cancel out; implicit outlier direction is "
                      "undefined");
    }
    // Same direction as the implicit prototype, at the prototypes' radius.
    ps.dummy = ps.mu + protos.norms.mean() * implicit / implicit.norm();
  }
  return ps;
}

Vector Logits(const PrototypeSet& ps, const Vector& z, double temperature) {
  const Matrix x = CenterNormalize(z, ps.mu).transpose();
  return LogitsOfNormalized(ps, NormalizePrototypes(ps).u, x, temperature)
      .row(0)
      .transpose();
}

LossBreakdown ComputeLoss(const PrototypeSet& ps, const Episode& episode,
                          const OstimConfig& cfg) {
  return Evaluate(ps, MakeProblem(ps, episode), cfg, false).loss;
}

LossGradient ComputeLossAndGradient(const PrototypeSet& ps,
                                    const Episode& episode,
                                    const OstimConfig& cfg) {
  return Evaluate(ps, MakeProblem(ps, episode), cfg, true);
}

RefineResult Refine(const PrototypeSet& initial, const Episode& episode,
                    const OstimConfig& cfg, const RefineObserver& observer) {
  cfg.Validate();
  const Problem problem = MakeProblem(initial, episode);
  RefineResult result{initial, {}};
  PrototypeSet& ps = result.prototypes;
  result.trace.reserve(cfg.n_steps + 1);
  // Non-finite or collapsed prototypes past the initial state are reported as
  // divergence at the step that sees them.
  auto evaluate = [&](int step, bool want_gradient) {
    auto diverged = [&](const std::string& why) {
      return DivergenceError(step, "refinement diverged at step " +
                                       std::to_string(step) + ": " + why);
    };
    if (!ps.w.allFinite() || (ps.dummy && !ps.dummy->allFinite())) {
      throw diverged("non-finite prototype");
    }
    LossGradient lg;
    try {
      lg = Evaluate(ps, problem, cfg, want_gradient);
    } catch (const DataError& e) {
      if (step == 0) throw;
      throw diverged(e.what());
    }
    if (!std::isfinite(lg.loss.total) || (want_gradient && !AllFinite(lg))) {
      throw diverged("non-finite loss or gradient");
    }
    return lg;
  };
  for (int step = 0; step < cfg.n_steps; ++step) {
    if (observer) observer(step, ps);
    const LossGradient lg = evaluate(step, true);
    result.trace.push_back(lg.loss);
    ps.w -= cfg.learning_rate * lg.w;
    if (lg.dummy.has_value()) *ps.dummy -= cfg.learning_rate * *lg.dummy;
  }
  if (observer) observer(cfg.n_steps, ps);
  result.trace.push_back(evaluate(cfg.n_steps, false).loss);
  return result;
}

PredictionSheet Predict(const PrototypeSet& ps, const Episode& episode,
                        const OstimConfig& cfg) {
  const Matrix query = CenterNormalizeRows(episode.query, ps.mu);
  PredictionSheet sheet;
  sheet.n_way = ps.n_way();
  sheet.probs = SoftmaxRows(LogitsOfNormalized(ps, NormalizePrototypes(ps).u,
                                               query, cfg.temperature));
  sheet.outlier_score.resize(query.rows());
  for (Eigen::Index i = 0; i < query.rows(); ++i) {
    sheet.outlier_score[i] =
        ps.variant == Variant::kTimClosed
            ? -sheet.probs.row(i).maxCoeff()
            : sheet.probs(i, ps.n_way());
  }
  FillClosedPredictions(sheet);
  return sheet;
}

PredictionSheet RunTransductive(const Episode& episode, Variant variant,
                                const OstimConfig& cfg,
                                const std::optional<Vector>& base_mean) {
  CenteringPolicy policy{cfg.centering, std::nullopt};
  if (cfg.centering == CenteringKind::kBase) policy.mu = base_mean;
  const PrototypeSet init = InitPrototypes(episode, policy, variant);
  return Predict(Refine(init, episode, cfg).prototypes, episode, cfg);
}

}  // namespace fsosr
