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

#ifndef FSOSR_DIAGNOSTICS_H_
#define FSOSR_DIAGNOSTICS_H_

#include <vector>

#include "fsosr/episode_sampler.h"
#include "fsosr/feature_store.h"

namespace fsosr {

// Vectors of one split, relabeled densely. class_ids[j] is the FeatureSet
// class behind dense label j.
struct LabeledPoints {
  Matrix x;
  std::vector<int> labels;
  std::vector<int> class_ids;

  int num_classes() const { return static_cast<int>(class_ids.size()); }
};

LabeledPoints ExtractSplit(const FeatureSet& fs, Split split);

// Fraction of class members strictly farther from `centroid` than z.
double ImpostureFactor(const Vector& z, const Matrix& class_members,
                       const Vector& centroid);

struct ClassImposture {
  int class_id = 0;
  double mean_if = 0.0;  // mean IF of every non-member against this class
};

struct DiagnosticReport {
  double mif = 0.0;
  double rho = 0.0;
  std::vector<ClassImposture> per_class;
};

// Per-class means, in dense label order.
Matrix ClassCentroids(const LabeledPoints& points);

// Mean Imposture Factor. Needs >= 2 classes, each nonempty.
double MeanImpostureFactor(const LabeledPoints& points,
                           std::vector<ClassImposture>* per_class = nullptr);

// Mean trace of within-class covariance over trace of the covariance of the
// class centroids (population normalization for both).
double VarianceRatio(const LabeledPoints& points);

DiagnosticReport Diagnose(const FeatureSet& fs, Split split);

}  // namespace fsosr

#endif  // FSOSR_DIAGNOSTICS_H_
