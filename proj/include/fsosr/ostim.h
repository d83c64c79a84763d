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

#ifndef FSOSR_OSTIM_H_
#define FSOSR_OSTIM_H_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fsosr/prediction.h"
#include "fsosr/transforms.h"

namespace fsosr {

// Transductive prototype refinement with mutual-information regularization.
//
// Every query z gets logits l_k = tau * <psi(z), psi(w_k)> against the K
// prototypes, where psi centers on a frozen mu and projects to the unit
// sphere. The open-set variants append a (K+1)-th "outlier" logit:
//
//   kOstimImplicit  l_{K+1} = -(1/K) sum_k l_k, i.e. similarity to the
//                   implicit prototype -(1/K) sum_k psi(w_k);
//   kExplicitDummy  l_{K+1} = tau * <psi(z), psi(dummy)>, an extra learnable
//                   prototype whose direction starts at the implicit one;
//   kTimClosed      no outlier column; outlierness = -max_k p_k.
//
// Prototypes start at the class centroids of the support set and are refined
// by full-batch gradient descent on
//
//   CE(support) - H(mean query prediction) + alpha * mean H(query prediction)
//
// with analytic gradients through the softmax, both entropies, and the
// prototype normalization.
enum class Variant { kOstimImplicit, kTimClosed, kExplicitDummy };

const char* VariantName(Variant variant);
// Accepts "implicit", "tim_closed", "explicit_dummy".
Variant ParseVariant(const std::string& name);

struct PrototypeSet {
  Matrix w;  // K x D, raw feature space
  Vector mu;
  Variant variant = Variant::kOstimImplicit;
  std::optional<Vector> dummy;  // kExplicitDummy only, raw feature space

  int n_way() const { return static_cast<int>(w.rows()); }
  // Number of softmax outcomes: K, or K+1 for the open-set variants.
  int n_outcomes() const {
    return variant == Variant::kTimClosed ? n_way() : n_way() + 1;
  }
};

struct OstimConfig {
  double alpha = 1.0;
  int n_steps = 200;
  double learning_rate = 1e-3;
  double temperature = 10.0;
  CenteringKind centering = CenteringKind::kTask;

  void Validate() const;
};

struct LossBreakdown {
  double ce = 0.0;
  double marginal_entropy = 0.0;
  double conditional_entropy = 0.0;
  // ce - (marginal_entropy - alpha * conditional_entropy)
  double total = 0.0;
};

struct LossGradient {
  LossBreakdown loss;
  Matrix w;                     // dL/dw, K x D
  std::optional<Vector> dummy;  // dL/d(dummy)
};

PrototypeSet InitPrototypes(const Episode& episode,
                            const CenteringPolicy& policy, Variant variant);

// Logits of one raw feature vector.
Vector Logits(const PrototypeSet& ps, const Vector& z, double temperature);

LossBreakdown ComputeLoss(const PrototypeSet& ps, const Episode& episode,
                          const OstimConfig& cfg);

LossGradient ComputeLossAndGradient(const PrototypeSet& ps,
                                    const Episode& episode,
                                    const OstimConfig& cfg);

struct RefineResult {
  PrototypeSet prototypes;
  // trace[s] is the loss before step s; trace[n_steps] is the final loss.
  std::vector<LossBreakdown> trace;
};

// Called before each update (step 0 .. n_steps-1) and once on the final state
// (step n_steps).
using RefineObserver = std::function<void(int step, const PrototypeSet&)>;

// cfg.n_steps gradient-descent steps on w (and dummy). Throws DivergenceError
// naming the step if the loss or gradient stops being finite.
RefineResult Refine(const PrototypeSet& initial, const Episode& episode,
                    const OstimConfig& cfg,
                    const RefineObserver& observer = nullptr);

PredictionSheet Predict(const PrototypeSet& ps, const Episode& episode,
                        const OstimConfig& cfg);

// Init + Refine + Predict with the configured centering.
PredictionSheet RunTransductive(const Episode& episode, Variant variant,
                                const OstimConfig& cfg,
                                const std::optional<Vector>& base_mean);

}  // namespace fsosr

#endif  // FSOSR_OSTIM_H_
