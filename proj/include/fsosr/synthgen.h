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

#ifndef FSOSR_SYNTHGEN_H_
#define FSOSR_SYNTHGEN_H_

#include <cstdint>
#include <vector>

#include "fsosr/feature_store.h"

namespace fsosr {

// Isotropic Gaussian clusters around centroids placed at `centroid_radius`
// from `global_shift` in uniformly random directions.
struct SynthSpec {
  int dim = 16;
  int n_classes = 30;
  int points_per_class = 60;
  double centroid_radius = 1.0;
  double within_std = 0.3;
  std::vector<double> global_shift;  // empty means the origin
  uint64_t seed = 0;
  // Fractions of classes per split; classes are assigned in id order.
  double base_fraction = 0.4;
  double val_fraction = 0.2;
  double test_fraction = 0.4;

  void Validate() const;
};

FeatureSet Generate(const SynthSpec& spec);

}  // namespace fsosr

#endif  // FSOSR_SYNTHGEN_H_
