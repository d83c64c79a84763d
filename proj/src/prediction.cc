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

#include "fsosr/prediction.h"

#include <cmath>

namespace fsosr {

Matrix SoftmaxRows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double max = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - max).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

void FillClosedPredictions(PredictionSheet& sheet) {
  sheet.closed_pred.resize(sheet.probs.rows());
  for (Eigen::Index i = 0; i < sheet.probs.rows(); ++i) {
    Eigen::Index best;
    sheet.probs.row(i).head(sheet.n_way).maxCoeff(&best);
    sheet.closed_pred[i] = static_cast<int>(best);
  }
}

std::vector<double> ClosedSetEntropy(const PredictionSheet& sheet) {
  std::vector<double> out(sheet.probs.rows());
  for (Eigen::Index i = 0; i < sheet.probs.rows(); ++i) {
    const auto closed = sheet.probs.row(i).head(sheet.n_way);
    const double mass = closed.sum();
    double h = 0.0;
    for (Eigen::Index k = 0; k < sheet.n_way; ++k) {
      const double p = closed[k] / mass;
      if (p > 0.0) h -= p * std::log(p);
    }
    out[i] = h;
  }
  return out;
}

}  // namespace fsosr
