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

#ifndef FSOSR_TRANSFORMS_H_
#define FSOSR_TRANSFORMS_H_

#include <optional>
#include <string>

#include "fsosr/episode_sampler.h"

namespace fsosr {

// Inputs closer than this to the center are rejected by CenterNormalize.
inline constexpr double kDegenerateNorm = 1e-12;

enum class CenteringKind { kNone, kBase, kTask };

const char* CenteringName(CenteringKind kind);
// Throws ConfigError on anything but "none", "base" or "task".
CenteringKind ParseCentering(const std::string& name);

// Where the centering vector comes from. BASE carries a precomputed mean;
// TASK is resolved per episode from raw features; NONE centers at zero.
struct CenteringPolicy {
  CenteringKind kind = CenteringKind::kNone;
  std::optional<Vector> mu;

  static CenteringPolicy None() { return {CenteringKind::kNone, std::nullopt}; }
  static CenteringPolicy Base(Vector base_mean) {
    return {CenteringKind::kBase, std::move(base_mean)};
  }
  static CenteringPolicy Task() { return {CenteringKind::kTask, std::nullopt}; }

  // Concrete center for `episode`.
  Vector Resolve(const Episode& episode) const;
};

// (z - mu) / ||z - mu||_2. Throws DataError if ||z - mu||_2 < kDegenerateNorm.
Vector CenterNormalize(const Vector& z, const Vector& mu);

// Row-wise CenterNormalize.
Matrix CenterNormalizeRows(const Matrix& rows, const Vector& mu);

// Mean over the union of support and query vectors.
Vector TaskMean(const Episode& episode);

}  // namespace fsosr

#endif  // FSOSR_TRANSFORMS_H_
