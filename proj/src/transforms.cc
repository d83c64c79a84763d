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

#include "fsosr/transforms.h"

#include <cmath>

#include "fsosr/error.h"

namespace fsosr {

const char* CenteringName(CenteringKind kind) {
  switch (kind) {
    case CenteringKind::kNone:
      return "none";
    case CenteringKind::kBase:
      return "base";
    case CenteringKind::kTask:
      return "task";
  }
  return "?";
}

CenteringKind ParseCentering(const std::string& name) {
  if (name == "none") return CenteringKind::kNone;
  if (name == "base") return CenteringKind::kBase;
  if (name == "task") return CenteringKind::kTask;
  throw ConfigError("unknown centering '" + name +
                    "' (expected none, base or task)");
}

Vector CenteringPolicy::Resolve(const Episode& episode) const {
  switch (kind) {
    case CenteringKind::kNone:
      return Vector::Zero(episode.dim());
    case CenteringKind::kBase:
      if (!mu.has_value()) {
        throw ConfigError("base centering requires a precomputed base mean");
      }
      if (mu->size() != episode.dim()) {
        throw ConfigError("base mean dimension does not match the episode");
      }
      if (!mu->allFinite()) throw DataError("base mean is not finite");
      return *mu;
    case CenteringKind::kTask:
      return TaskMean(episode);
  }
  return Vector::Zero(episode.dim());
}

Vector CenterNormalize(const Vector& z, const Vector& mu) {
  Vector centered = z - mu;
  const double norm = centered.norm();
  if (!std::isfinite(norm)) {
    throw DataError("center-normalize: non-finite input");
  }
  if (norm < kDegenerateNorm) {
    throw DataError("center-normalize: vector lies within 1e-12 of the center");
  }
  return centered / norm;
}

Matrix CenterNormalizeRows(const Matrix& rows, const Vector& mu) {
  Matrix out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out.row(i) = CenterNormalize(rows.row(i).transpose(), mu).transpose();
  }
  return out;
}

Vector TaskMean(const Episode& episode) {
  const double n = static_cast<double>(episode.n_support() + episode.n_query());
  return (episode.support.colwise().sum() + episode.query.colwise().sum())
             .transpose() /
         n;
}

}  // namespace fsosr
